#pragma once

// Classical and quantum Fisher information: finite-difference estimators,
// the generator-variance form, closed-form reference values and the
// Cramer-Rao bound.

#include "phonon/fock.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace phonon {

/// lambda -> {p_k(lambda)}. Vectors may be sub-normalized when outcomes are
/// truncated; the missing mass is reported as a deficit.
struct ProbabilityModel {
  std::function<std::vector<double>(double)> evaluate;
  std::vector<std::string> labels;
};

struct CfiOptions {
  double p_floor = 1e-12;
  /// Combine steps h and h/2 as (4 D(h/2) - D(h)) / 3.
  bool richardson = false;
};

struct FisherEstimate {
  double value = 0.0;
  double excluded_mass = 0.0;  ///< probability in outcomes below p_floor
  double deficit = 0.0;        ///< 1 - sum_k p_k(lambda)
};

namespace detail {

inline std::vector<double> checked_probabilities(const ProbabilityModel& model, double lambda) {
  auto p = model.evaluate(lambda);
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw std::invalid_argument("probability model returned a negative or NaN probability");
    total += x;
  }
  if (total > 1.0 + 1e-9) throw std::invalid_argument("probabilities sum above one");
  if (!model.labels.empty() && model.labels.size() != p.size())
    throw std::invalid_argument("probability vector does not match outcome labels");
  return p;
}

inline std::vector<double> central_difference(const ProbabilityModel& model, double lambda, double h,
                                              std::size_t size) {
  const auto plus = checked_probabilities(model, lambda + h);
  const auto minus = checked_probabilities(model, lambda - h);
  if (plus.size() != size || minus.size() != size) throw std::invalid_argument("outcome count changed with lambda");
  std::vector<double> d(size);
  for (std::size_t k = 0; k < size; ++k) d[k] = (plus[k] - minus[k]) / (2.0 * h);
  return d;
}

}  // namespace detail

/// F_C(lambda) = sum_k (dp_k/dlambda)^2 / p_k by central differences.
inline FisherEstimate cfi(const ProbabilityModel& model, double lambda, double step = 1e-4,
                          const CfiOptions& options = {}) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const auto p = detail::checked_probabilities(model, lambda);
  auto dp = detail::central_difference(model, lambda, step, p.size());
  if (options.richardson) {
    const auto half = detail::central_difference(model, lambda, step / 2.0, p.size());
    for (std::size_t k = 0; k < dp.size(); ++k) dp[k] = (4.0 * half[k] - dp[k]) / 3.0;
  }
  FisherEstimate out;
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    total += p[k];
    if (p[k] < options.p_floor) {
      out.excluded_mass += p[k];
      continue;
    }
    out.value += dp[k] * dp[k] / p[k];
  }
  out.deficit = 1.0 - total;
  return out;
}

/// Pure-state QFI 4(<d psi|d psi> - |<psi|d psi>|^2) by central differences.
/// Each state is rotated so that the amplitude at the largest-magnitude index
/// of psi(lambda) is real and positive, which fixes a smooth phase gauge.
inline double qfi_pure_numeric(const std::function<StateVector(double)>& state_at, double lambda, double step = 1e-4) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const StateVector mid = state_at(lambda);
  const StateVector plus = state_at(lambda + step);
  const StateVector minus = state_at(lambda - step);
  for (const auto* s : {&mid, &plus, &minus})
    if (std::abs(s->norm() - 1.0) > 1e-8) throw std::invalid_argument("supplied state is not normalized");
  if (!(plus.space() == mid.space()) || !(minus.space() == mid.space()))
    throw std::invalid_argument("states differ in space");
  Eigen::Index pivot = 0;
  mid.amplitudes().cwiseAbs().maxCoeff(&pivot);
  auto gauge = [pivot](const StateVector& s) -> Vector {
    const cplx a = s.amplitudes()(pivot);
    return std::abs(a) > 0.0 ? Vector(s.amplitudes() * (std::abs(a) / a)) : s.amplitudes();
  };
  const Vector psi = gauge(mid);
  const Vector d = (gauge(plus) - gauge(minus)) / (2.0 * step);
  return 4.0 * (d.squaredNorm() - std::norm(psi.dot(d)));
}

/// QFI of exp(i lambda G)|psi0>: 4 Var(G).
inline double qfi_generator(const Operator& g, const StateVector& psi0) {
  if (!(g.space() == psi0.space())) throw std::invalid_argument("generator and state differ in space");
  if (g.hermiticity_defect() > 1e-12 * std::max(1.0, g.max_abs())) throw std::invalid_argument("generator is not Hermitian");
  const Vector& psi = psi0.amplitudes();
  const Vector gpsi = g.matrix() * psi;
  const double mean = psi.dot(gpsi).real() / psi.squaredNorm();
  return 4.0 * (gpsi - mean * psi).squaredNorm() / psi.squaredNorm();
}

enum class ClosedFormQfi {
  tmss_r,      ///< squeezing amplitude: 4
  tmss_theta,  ///< squeezing phase: 4 nbar (nbar + 1), nbar = sinh^2 r; arg = r
  bs_epsilon,  ///< beam-splitter phase on |n,n>: 8 n (n + 1); arg = n
};

inline double closed_form_qfi(ClosedFormQfi which, double arg = 0.0) {
  switch (which) {
    case ClosedFormQfi::tmss_r: return 4.0;
    case ClosedFormQfi::tmss_theta: {
      if (arg < 0.0) throw std::invalid_argument("r must be non-negative");
      const double nbar = std::sinh(arg) * std::sinh(arg);
      return 4.0 * nbar * (nbar + 1.0);
    }
    case ClosedFormQfi::bs_epsilon:
      if (arg < 0.0 || arg != std::floor(arg)) throw std::invalid_argument("n must be a non-negative integer");
      return 8.0 * arg * (arg + 1.0);
  }
  throw std::invalid_argument("unknown closed form");
}

/// Smallest attainable variance 1/F. Zero information gives +infinity.
inline double cramer_rao(double fisher) {
  if (fisher < 0.0 || std::isnan(fisher)) throw std::invalid_argument("Fisher information must be non-negative");
  if (fisher == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / fisher;
}

}  // namespace phonon
