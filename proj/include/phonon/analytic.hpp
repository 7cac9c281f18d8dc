#pragma once

// Closed-form reference results: two-mode squeezed vacuum, beam-splitter
// transition amplitudes, the ideal Fredkin gate and spin-entangled N00N states.

#include "phonon/fock.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace phonon {

/// zeta = r e^{i theta}
struct SqueezeParams {
  double r = 0.0;
  double theta = 0.0;
};

/// Beam-splitter rate epsilon (rad/ms) and drive phase phi; the mixing angle is epsilon * t.
struct BsParams {
  double epsilon = 0.0;
  double phi = 0.0;

  double angle(double t) const { return epsilon * t; }
};

namespace detail {

inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline HilbertSpace two_mode_space(Mode first, Mode second, std::size_t n_max) {
  return HilbertSpace({{first, n_max + 1}, {second, n_max + 1}});
}

}  // namespace detail

/// Twin-Fock population of the two-mode squeezed vacuum, tanh^{2n}(r) / cosh^2(r).
inline double tmss_prob(int n, double r) {
  if (n < 0 || r < 0.0) throw std::invalid_argument("tmss_prob needs n >= 0 and r >= 0");
  const double t = std::tanh(r), ch = std::cosh(r);
  return std::pow(t, 2.0 * n) / (ch * ch);
}

struct TmssState {
  StateVector state;
  double tail_mass;      ///< population beyond n_max dropped by the truncation
  double renormalization;  ///< factor applied to restore unit norm
};

/// sum_n (e^{i theta} tanh r)^n / cosh r |n,n> on two modes truncated at n_max,
/// renormalized after truncation. Throws when the dropped tail exceeds max_tail.
inline TmssState tmss_state(const SqueezeParams& p, const HilbertSpace& space, double max_tail = 1e-10) {
  if (p.r < 0.0) throw std::invalid_argument("squeezing amplitude must be non-negative");
  if (space.size() != 2 || space.contains(Mode::spin))
    throw std::invalid_argument("two-mode squeezed state needs exactly two bosonic modes");
  const auto& subs = space.subsystems();
  const std::size_t n_max = std::min(subs[0].dim, subs[1].dim) - 1;
  const double t = std::tanh(p.r);
  const double tail = std::pow(t, 2.0 * static_cast<double>(n_max + 1));
  if (tail > max_tail)
    throw std::invalid_argument("truncation too small for r: tail mass " + std::to_string(tail) + " exceeds " +
                                std::to_string(max_tail));
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
  for (std::size_t n = 0; n <= n_max; ++n) {
    const std::size_t digits[2] = {n, n};
    amps(static_cast<Eigen::Index>(space.index(digits))) =
        std::polar(std::pow(t, static_cast<double>(n)) / std::cosh(p.r), p.theta * static_cast<double>(n));
  }
  const double norm = amps.norm();
  return {StateVector(space, amps / norm), tail, 1.0 / norm};
}

/// Two-mode squeezed state on the (b, c) modes.
inline TmssState tmss_state(const SqueezeParams& p, std::size_t n_max, double max_tail = 1e-10) {
  return tmss_state(p, detail::two_mode_space(Mode::b, Mode::c, n_max), max_tail);
}

/// Transition amplitude C^{n1,n2}_{N1,N2} of the beam splitter at mixing
/// angle x = epsilon t:
///   sum_{k,l} (-1)^{n1-k} sin^{n1+n2-k-l}(x) cos^{k+l}(x)
///     sqrt(n1! n2! N1! N2!) / (k! (n1-k)! l! (n2-l)!)
/// restricted to N1 = n2 + k - l, N2 = n1 - k + l.
inline double bs_coefficient(int n1, int n2, int N1, int N2, double angle) {
  if (n1 < 0 || n2 < 0 || N1 < 0 || N2 < 0) throw std::invalid_argument("phonon numbers must be non-negative");
  if (N1 + N2 != n1 + n2) return 0.0;
  const double s = std::sin(angle), c = std::cos(angle);
  const double log_norm =
      0.5 * (detail::log_factorial(n1) + detail::log_factorial(n2) + detail::log_factorial(N1) + detail::log_factorial(N2));
  std::vector<double> terms;
  for (int k = 0; k <= n1; ++k) {
    const int l = N2 - n1 + k;
    if (l < 0 || l > n2) continue;
    const double mag = std::exp(log_norm - detail::log_factorial(k) - detail::log_factorial(n1 - k) -
                                detail::log_factorial(l) - detail::log_factorial(n2 - l));
    const double sign = ((n1 - k) % 2 == 0) ? 1.0 : -1.0;
    terms.push_back(sign * mag * std::pow(s, n1 + n2 - k - l) * std::pow(c, k + l));
  }
  return detail::pairwise_sum(terms);
}

/// exp(-i eps t (a^dagger c e^{i phi} + h.c.)) |n1, n2> on the (a, c) modes:
///   sum e^{-i(phi - pi/2)(n1 - N1)} C^{n1,n2}_{N1,N2} |N1, N2>.
/// n_max defaults to n1 + n2, the smallest truncation holding every outcome.
inline StateVector bs_final_state(int n1, int n2, const BsParams& p, double t, std::optional<std::size_t> n_max = {}) {
  if (n1 < 0 || n2 < 0) throw std::invalid_argument("phonon numbers must be non-negative");
  if (p.epsilon < 0.0) throw std::invalid_argument("beam-splitter rate must be non-negative");
  const int total = n1 + n2;
  const std::size_t nm = n_max.value_or(static_cast<std::size_t>(total));
  if (nm < static_cast<std::size_t>(total)) throw std::invalid_argument("truncation smaller than total phonon number");
  const HilbertSpace space = detail::two_mode_space(Mode::a, Mode::c, nm);
  const double x = p.angle(t);
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
  for (int N1 = 0; N1 <= total; ++N1) {
    const int N2 = total - N1;
    const std::size_t digits[2] = {static_cast<std::size_t>(N1), static_cast<std::size_t>(N2)};
    const double phase = -(p.phi - std::numbers::pi / 2.0) * static_cast<double>(n1 - N1);
    amps(static_cast<Eigen::Index>(space.index(digits))) = std::polar(bs_coefficient(n1, n2, N1, N2, x), phase);
  }
  return StateVector(space, std::move(amps));
}

/// Ideal Fredkin gate on (spin, a, c):
///   |down, n, m> -> |down, n, m>,  |up, n, m> -> (-i)^{n+m} |up, m, n>.
inline StateVector fredkin_apply(const StateVector& psi) {
  const auto& space = psi.space();
  if (space.labels() != std::vector<Mode>{Mode::spin, Mode::a, Mode::c})
    throw std::invalid_argument("Fredkin gate acts on the (spin, a, c) space");
  if (space.dim(Mode::a) != space.dim(Mode::c)) throw std::invalid_argument("Fredkin gate needs equal a and c truncations");
  const std::size_t d = space.dim(Mode::a);
  static constexpr cplx minus_i_powers[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  Vector out = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
  for (std::size_t n = 0; n < d; ++n)
    for (std::size_t m = 0; m < d; ++m) {
      const std::size_t down[3] = {static_cast<std::size_t>(Spin::down), n, m};
      const std::size_t up_in[3] = {static_cast<std::size_t>(Spin::up), n, m};
      const std::size_t up_out[3] = {static_cast<std::size_t>(Spin::up), m, n};
      const auto di = static_cast<Eigen::Index>(space.index(down));
      out(di) = psi.amplitudes()(di);
      out(static_cast<Eigen::Index>(space.index(up_out))) =
          minus_i_powers[(n + m) % 4] * psi.amplitudes()(static_cast<Eigen::Index>(space.index(up_in)));
    }
  return StateVector(space, std::move(out));
}

/// (|down>|n,0> + (-i)^n |up>|0,n>) / sqrt(2) on (spin, a, c).
inline StateVector noon_state(std::size_t n, std::size_t n_max) {
  if (n > n_max) throw std::invalid_argument("N00N photon number exceeds truncation");
  const HilbertSpace space({{Mode::spin, 2}, {Mode::a, n_max + 1}, {Mode::c, n_max + 1}});
  static constexpr cplx minus_i_powers[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
  const std::size_t down[3] = {static_cast<std::size_t>(Spin::down), n, 0};
  const std::size_t up[3] = {static_cast<std::size_t>(Spin::up), 0, n};
  amps(static_cast<Eigen::Index>(space.index(down))) += std::sqrt(0.5);
  amps(static_cast<Eigen::Index>(space.index(up))) += std::sqrt(0.5) * minus_i_powers[n % 4];
  return StateVector(space, std::move(amps));
}

/// Time for a full conditional swap, pi / (2 eps_b).
inline double gate_time(double eps_b) {
  if (!(eps_b > 0.0)) throw std::invalid_argument("gate time needs a positive rate");
  return std::numbers::pi / (2.0 * eps_b);
}

}  // namespace phonon
