#pragma once

// Rotating-frame and effective Hamiltonians for three coupled phonon modes
// (a, b, c), optionally with a spin. hbar = 1 and every rate is an angular
// frequency in rad/ms, so times are in ms.

#include "phonon/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phonon {

/// nu/2pi in kHz -> angular frequency in rad/ms.
inline double khz_to_angular(double khz) {
  if (!(khz >= 0.0)) throw std::invalid_argument("frequency must be non-negative");
  return 2.0 * std::numbers::pi * khz;
}

inline double angular_to_khz(double angular) {
  if (!(angular >= 0.0)) throw std::invalid_argument("frequency must be non-negative");
  return angular / (2.0 * std::numbers::pi);
}

enum class HamiltonianKind { trilinear, driven_a, driven_b, spin_conditional, effective_tmss, effective_bs };

inline std::string_view kind_name(HamiltonianKind k) {
  switch (k) {
    case HamiltonianKind::trilinear: return "trilinear";
    case HamiltonianKind::driven_a: return "driven_a";
    case HamiltonianKind::driven_b: return "driven_b";
    case HamiltonianKind::spin_conditional: return "spin_conditional";
    case HamiltonianKind::effective_tmss: return "effective_tmss";
    case HamiltonianKind::effective_bs: return "effective_bs";
  }
  return "?";
}

inline HamiltonianKind parse_kind(std::string_view s) {
  for (auto k : {HamiltonianKind::trilinear, HamiltonianKind::driven_a, HamiltonianKind::driven_b,
                 HamiltonianKind::spin_conditional, HamiltonianKind::effective_tmss, HamiltonianKind::effective_bs})
    if (kind_name(k) == s) return k;
  throw std::invalid_argument("unknown hamiltonian kind '" + std::string(s) + "'");
}

struct Truncation {
  std::size_t a = 20;
  std::size_t b = 20;
  std::size_t c = 20;

  static Truncation uniform(std::size_t n) { return {n, n, n}; }
  bool operator==(const Truncation&) const = default;
};

struct HamiltonianSpec {
  HamiltonianKind kind = HamiltonianKind::trilinear;
  double xi = 0.0;     ///< trilinear coupling
  double omega = 0.0;  ///< detuning
  double drive = 0.0;  ///< Omega_a or Omega_b depending on kind
  double phi = 0.0;    ///< drive phase, rad
  double g_b = 0.0;    ///< spin-phonon coupling
  double eta_b = 0.0;  ///< Lamb-Dicke parameter
  bool include_residual = false;
  bool include_ac_stark = false;
  Truncation n_max;

  void validate() const {
    if (xi < 0 || omega < 0 || drive < 0 || g_b < 0) throw std::invalid_argument("rates must be non-negative");
    if (!(eta_b >= 0.0 && eta_b < 1.0)) throw std::invalid_argument("eta_b must lie in [0, 1)");
    if (n_max.a < 1 || n_max.b < 1 || n_max.c < 1) throw std::invalid_argument("n_max must be at least 1");
  }

  /// Set when a coupling is not small against the detuning, max(drive, xi, g_b) > omega/3.
  bool weak_coupling_advisory() const { return std::max({drive, xi, g_b}) > omega / 3.0; }
};

inline HilbertSpace space_for(const HamiltonianSpec& spec) {
  std::vector<Subsystem> subs{{Mode::a, spec.n_max.a + 1}, {Mode::b, spec.n_max.b + 1}, {Mode::c, spec.n_max.c + 1}};
  if (spec.kind == HamiltonianKind::spin_conditional) subs.push_back({Mode::spin, 2});
  return HilbertSpace(std::move(subs));
}

namespace detail {

inline void require_kind(const HamiltonianSpec& spec, HamiltonianKind k) {
  spec.validate();
  if (spec.kind != k)
    throw std::invalid_argument("spec kind is '" + std::string(kind_name(spec.kind)) + "', expected '" +
                                std::string(kind_name(k)) + "'");
}

/// Y + Y^dagger; exactly Hermitian entry by entry.
inline Operator hermitian_sum(const Operator& y) { return y + y.adjoint(); }

/// xi (a^dagger b c + a b^dagger c^dagger)
inline Operator trilinear_term(const HilbertSpace& space, double xi) {
  const Operator a = ladder(space, Mode::a), b = ladder(space, Mode::b), c = ladder(space, Mode::c);
  return hermitian_sum(xi * (a.adjoint() * b * c));
}

/// amp (m^dagger e^{i phi} + m e^{-i phi})
inline Operator drive_term(const HilbertSpace& space, Mode m, double amp, double phi) {
  return hermitian_sum(amp * std::polar(1.0, phi) * ladder(space, m).adjoint());
}

/// n_a + n_a n_b + n_a n_c - n_b n_c
inline Operator residual_number_terms(const HilbertSpace& space) {
  const Operator na = number(space, Mode::a), nb = number(space, Mode::b), nc = number(space, Mode::c);
  return na + na * nb + na * nc - nb * nc;
}

}  // namespace detail

/// xi (a^dagger b c + a b^dagger c^dagger); mode self-energies live in the rotating frame.
inline Operator build_trilinear(const HamiltonianSpec& spec) {
  detail::require_kind(spec, HamiltonianKind::trilinear);
  return detail::trilinear_term(space_for(spec), spec.xi);
}

/// omega n_a + Omega_a (a^dagger e^{i phi} + h.c.) + trilinear term.
inline Operator build_driven_a(const HamiltonianSpec& spec) {
  detail::require_kind(spec, HamiltonianKind::driven_a);
  const auto space = space_for(spec);
  return spec.omega * number(space, Mode::a) + detail::drive_term(space, Mode::a, spec.drive, spec.phi) +
         detail::trilinear_term(space, spec.xi);
}

/// -omega n_b + Omega_b (b^dagger e^{i phi} + h.c.) + trilinear term.
inline Operator build_driven_b(const HamiltonianSpec& spec) {
  detail::require_kind(spec, HamiltonianKind::driven_b);
  const auto space = space_for(spec);
  return -spec.omega * number(space, Mode::b) + detail::drive_term(space, Mode::b, spec.drive, spec.phi) +
         detail::trilinear_term(space, spec.xi);
}

/// Diagonal entries f_m of the Lamb-Dicke operator F(n_b),
///   f_m = e^{-eta^2/2} sum_{n=0}^{m} (-eta^2)^n m! / (n! (n+1)! (m-n)!).
/// The sum is finite per entry, so it is evaluated exactly term by term.
inline std::vector<double> lamb_dicke_diagonal(double eta, std::size_t n_max) {
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  const double x = eta * eta;
  std::vector<double> f(n_max + 1);
  for (std::size_t m = 0; m <= n_max; ++m) {
    double term = 1.0, sum = 1.0;
    for (std::size_t n = 0; n < m; ++n) {
      term *= -x * static_cast<double>(m - n) / (static_cast<double>(n + 1) * static_cast<double>(n + 2));
      sum += term;
    }
    f[m] = std::exp(-x / 2.0) * sum;
  }
  return f;
}

/// F(n_b) on a lone b-mode space of dimension n_max + 1.
inline Operator lamb_dicke_operator(double eta, std::size_t n_max) {
  const HilbertSpace space({{Mode::b, n_max + 1}});
  return diagonal(space, Mode::b, lamb_dicke_diagonal(eta, n_max));
}

/// -omega n_b + g_b (b^dagger F + F b)|up><up| + trilinear term [- (g_b^2/omega)|up><up|].
inline Operator build_spin_conditional(const HamiltonianSpec& spec, const HilbertSpace& space) {
  detail::require_kind(spec, HamiltonianKind::spin_conditional);
  if (!space.contains(Mode::spin)) throw std::invalid_argument("spin-conditional Hamiltonian needs a spin subsystem");
  const Operator up = spin_projector(space, Spin::up);
  const Operator f = diagonal(space, Mode::b, lamb_dicke_diagonal(spec.eta_b, space.n_max(Mode::b)));
  Operator h = -spec.omega * number(space, Mode::b) +
               detail::hermitian_sum(spec.g_b * (ladder(space, Mode::b).adjoint() * f * up)) +
               detail::trilinear_term(space, spec.xi);
  if (spec.include_ac_stark) {
    if (spec.omega == 0.0) throw std::invalid_argument("AC-Stark compensation needs a nonzero detuning");
    h = h - (spec.g_b * spec.g_b / spec.omega) * up;
  }
  return h;
}

inline Operator build_spin_conditional(const HamiltonianSpec& spec) {
  return build_spin_conditional(spec, space_for(spec));
}

/// omega n_a - (Omega_a xi/omega)(e^{i phi} b^dagger c^dagger + h.c.) [+ H_a'],
///   H_a' = -Omega_a^2/omega + (xi^2/omega)(n_a + n_a n_b + n_a n_c - n_b n_c).
inline Operator build_effective_tmss(const HamiltonianSpec& spec) {
  detail::require_kind(spec, HamiltonianKind::effective_tmss);
  if (spec.omega == 0.0) throw std::invalid_argument("effective Hamiltonian needs a nonzero detuning");
  const auto space = space_for(spec);
  const double rate = spec.drive * spec.xi / spec.omega;
  const Operator b = ladder(space, Mode::b), c = ladder(space, Mode::c);
  Operator h = spec.omega * number(space, Mode::a) -
               detail::hermitian_sum(rate * std::polar(1.0, spec.phi) * (b.adjoint() * c.adjoint()));
  if (spec.include_residual)
    h = h - (spec.drive * spec.drive / spec.omega) * identity(space) +
        (spec.xi * spec.xi / spec.omega) * detail::residual_number_terms(space);
  return h;
}

/// -omega n_b + (Omega_b xi/omega)(a^dagger c e^{i phi} + h.c.) [+ H_b'],
///   H_b' = Omega_b^2/omega - (xi^2/omega)(n_a + n_a n_b + n_a n_c - n_b n_c).
inline Operator build_effective_bs(const HamiltonianSpec& spec) {
  detail::require_kind(spec, HamiltonianKind::effective_bs);
  if (spec.omega == 0.0) throw std::invalid_argument("effective Hamiltonian needs a nonzero detuning");
  const auto space = space_for(spec);
  const double rate = spec.drive * spec.xi / spec.omega;
  const Operator a = ladder(space, Mode::a), c = ladder(space, Mode::c);
  Operator h = -spec.omega * number(space, Mode::b) +
               detail::hermitian_sum(rate * std::polar(1.0, spec.phi) * (a.adjoint() * c));
  if (spec.include_residual)
    h = h + (spec.drive * spec.drive / spec.omega) * identity(space) -
        (spec.xi * spec.xi / spec.omega) * detail::residual_number_terms(space);
  return h;
}

inline Operator build_hamiltonian(const HamiltonianSpec& spec) {
  switch (spec.kind) {
    case HamiltonianKind::trilinear: return build_trilinear(spec);
    case HamiltonianKind::driven_a: return build_driven_a(spec);
    case HamiltonianKind::driven_b: return build_driven_b(spec);
    case HamiltonianKind::spin_conditional: return build_spin_conditional(spec);
    case HamiltonianKind::effective_tmss: return build_effective_tmss(spec);
    case HamiltonianKind::effective_bs: return build_effective_bs(spec);
  }
  throw std::invalid_argument("unknown hamiltonian kind");
}

/// Effective two-mode squeezing or beam-splitter rate, drive * xi / omega
/// (g_b * xi / omega for the spin-conditional case).
inline double effective_rate(const HamiltonianSpec& spec) {
  if (spec.omega == 0.0) throw std::invalid_argument("effective rate needs a nonzero detuning");
  const double drive = spec.kind == HamiltonianKind::spin_conditional ? spec.g_b : spec.drive;
  return drive * spec.xi / spec.omega;
}

}  // namespace phonon
