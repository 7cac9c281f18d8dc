#pragma once

// Time evolution |psi(t)> = exp(-iHt)|psi(0)> for time-independent Hermitian
// Hamiltonians. The production path is a Lanczos (Krylov) approximation of
// the exponential with adaptive substeps; a dense eigendecomposition path
// exists for small spaces and serves as its cross-check.

#include "phonon/fock.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phonon {

/// Raised when the requested accuracy cannot be reached.
class ToleranceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvolveOptions {
  std::size_t krylov_dim = 30;
  bool store_states = true;
  /// Called once per output time, in order.
  std::function<void(std::size_t, double, const StateVector&)> observer;
};

class Trajectory {
 public:
  struct Record {
    std::string name;
    std::vector<double> values;
  };

  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<Record> records;
  double max_norm_error = 0.0;
  std::size_t substeps = 0;

  void add_record(std::string name, std::vector<double> values) {
    if (values.size() != times.size()) throw std::invalid_argument("record '" + name + "' does not match the time grid");
    for (auto& r : records)
      if (r.name == name) {
        r.values = std::move(values);
        return;
      }
    records.push_back({std::move(name), std::move(values)});
  }

  const std::vector<double>& record(std::string_view name) const {
    for (const auto& r : records)
      if (r.name == name) return r.values;
    throw std::out_of_range("no record named '" + std::string(name) + "'");
  }

  bool has_record(std::string_view name) const {
    return std::any_of(records.begin(), records.end(), [&](const Record& r) { return r.name == name; });
  }
};

namespace detail {

/// Applies exp(-i dt H) to a vector by restarted Lanczos steps. Each substep
/// builds an m-dimensional Krylov basis, exponentiates the tridiagonal
/// projection through its eigendecomposition, and accepts the step when the
/// a-posteriori estimate beta_0 * beta_m * |[exp(-i tau T)]_{m,1}| stays
/// within tol * tau / horizon, so the accumulated error over the horizon is
/// bounded by tol.
class KrylovExponential {
 public:
  KrylovExponential(const SparseMatrix& h, std::size_t krylov_dim, double tol, double horizon)
      : h_(h), m_(std::min<std::size_t>(krylov_dim, static_cast<std::size_t>(h.rows()))), tol_(tol), horizon_(horizon) {
    if (m_ < 1) throw std::invalid_argument("Krylov dimension must be at least 1");
    basis_.resize(h.rows(), static_cast<Eigen::Index>(m_ + 1));
  }

  std::size_t substeps() const { return substeps_; }

  void advance(Vector& psi, double dt) {
    double done = 0.0;
    while (done < dt) {
      const double remaining = dt - done;
      const double beta0 = psi.norm();
      if (beta0 == 0.0) return;
      const std::size_t m = build_basis(psi, beta0);
      const bool exact = breakdown_;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(alpha_.head(static_cast<Eigen::Index>(m)), beta_.head(static_cast<Eigen::Index>(m) - 1),
                                Eigen::ComputeEigenvectors);
      const Eigen::VectorXd& lam = es.eigenvalues();
      const Eigen::MatrixXd& q = es.eigenvectors();
      const double spread = lam.maxCoeff() - lam.minCoeff();

      double tau = tau_guess_ > 0.0 ? tau_guess_ : remaining;
      if (!exact && spread > 0.0) tau = std::min(tau, 2.0 * static_cast<double>(m) / spread);
      bool clipped = false;
      if (tau >= remaining) tau = remaining, clipped = true;

      Eigen::VectorXcd coeff;
      double err = 0.0;
      for (int attempt = 0;; ++attempt) {
        coeff = small_exponential(lam, q, tau);
        err = exact ? 0.0 : beta0 * beta_(static_cast<Eigen::Index>(m) - 1) * std::abs(coeff(static_cast<Eigen::Index>(m) - 1));
        // the estimate cannot resolve anything below the rounding noise of
        // the small exponential, so that noise is accepted as converged
        const double noise = 16.0 * std::numeric_limits<double>::epsilon() * beta0 * beta_(static_cast<Eigen::Index>(m) - 1);
        const double budget = std::max(tol_ * tau / horizon_, noise);
        if (err <= budget) {
          // noise-level estimates say nothing about the safe step, so grow freely
          const double grow = err > noise ? 0.9 * std::pow(budget / err, 1.0 / static_cast<double>(m)) : 5.0;
          const double next = tau * std::clamp(grow, 0.2, 5.0);
          // a step clipped to the output grid does not shrink the next guess
          tau_guess_ = clipped && attempt == 0 ? std::max(tau_guess_, next) : next;
          break;
        }
        const double shrink = 0.9 * std::pow(budget / err, 1.0 / static_cast<double>(m));
        tau *= std::clamp(shrink, 0.1, 0.9);
        if (tau < horizon_ * 1e-13 || attempt > 200)
          throw ToleranceError("Krylov step size fell below its floor before reaching tolerance " + std::to_string(tol_));
      }
      psi = beta0 * (basis_.leftCols(static_cast<Eigen::Index>(m)) * coeff);
      done += tau;
      ++substeps_;
      if (remaining - tau <= 1e-15 * dt) break;
    }
  }

 private:
  std::size_t build_basis(const Vector& psi, double beta0) {
    const auto m = static_cast<Eigen::Index>(m_);
    alpha_.resize(m);
    beta_.resize(m);
    breakdown_ = false;
    basis_.col(0) = psi / beta0;
    Vector w(psi.size());
    for (Eigen::Index j = 0; j < m; ++j) {
      w.noalias() = h_ * basis_.col(j);
      alpha_(j) = basis_.col(j).dot(w).real();
      w -= alpha_(j) * basis_.col(j);
      if (j > 0) w -= beta_(j - 1) * basis_.col(j - 1);
      // one pass of full reorthogonalization keeps the basis orthonormal to
      // working precision, which the error estimate relies on
      const auto v = basis_.leftCols(j + 1);
      proj_.noalias() = v.adjoint() * w;
      w.noalias() -= v * proj_;
      beta_(j) = w.norm();
      if (beta_(j) <= 1e-13 * (std::abs(alpha_(j)) + (j > 0 ? beta_(j - 1) : 0.0) + 1e-300)) {
        breakdown_ = true;
        return static_cast<std::size_t>(j + 1);
      }
      basis_.col(j + 1) = w / beta_(j);
    }
    return m_;
  }

  static Eigen::VectorXcd small_exponential(const Eigen::VectorXd& lam, const Eigen::MatrixXd& q, double tau) {
    // exp(-i tau T) e_1 = Q diag(exp(-i tau lam)) Q^T e_1
    Eigen::VectorXcd z(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k) z(k) = std::polar(q(0, k), -tau * lam(k));
    return q.cast<cplx>() * z;
  }

  const SparseMatrix& h_;
  std::size_t m_;
  double tol_;
  double horizon_;
  DenseMatrix basis_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd beta_;
  Vector proj_;
  bool breakdown_ = false;
  double tau_guess_ = 0.0;
  std::size_t substeps_ = 0;
};

inline void check_hermitian(const Operator& h) {
  const double scale = std::max(1.0, h.max_abs());
  if (h.hermiticity_defect() > 1e-12 * scale) throw std::invalid_argument("Hamiltonian is not Hermitian");
}

inline void check_times(std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("time grid is empty");
  if (!(times.front() >= 0.0)) throw std::invalid_argument("times must be non-negative");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("times must be strictly increasing");
}

}  // namespace detail

/// Propagates psi0 under H and reports the state at each requested time.
inline Trajectory evolve(const Operator& h, const StateVector& psi0, std::span<const double> times, double tol = 1e-9,
                         const EvolveOptions& options = {}) {
  if (!(h.space() == psi0.space())) throw std::invalid_argument("Hamiltonian and initial state differ in space");
  if (!(tol > 0.0 && tol <= 1e-4)) throw std::invalid_argument("tolerance must lie in (0, 1e-4]");
  if (std::abs(psi0.norm() - 1.0) > 1e-12) throw std::invalid_argument("initial state is not normalized");
  detail::check_times(times);
  detail::check_hermitian(h);

  Trajectory traj;
  traj.times.assign(times.begin(), times.end());
  const double horizon = std::max(times.back(), std::numeric_limits<double>::min());
  const bool trivial = h.matrix().nonZeros() == 0;
  detail::KrylovExponential kexp(h.matrix(), options.krylov_dim, tol, horizon);

  Vector psi = psi0.amplitudes();
  double t_now = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!trivial && times[k] > t_now) kexp.advance(psi, times[k] - t_now);
    t_now = times[k];
    const double norm_err = std::abs(psi.norm() - 1.0);
    traj.max_norm_error = std::max(traj.max_norm_error, norm_err);
    if (norm_err > 10.0 * tol) throw ToleranceError("norm drifted by " + std::to_string(norm_err));
    StateVector state(psi0.space(), psi);
    if (options.observer) options.observer(k, times[k], state);
    if (options.store_states) traj.states.push_back(std::move(state));
  }
  traj.substeps = kexp.substeps();
  return traj;
}

inline Trajectory evolve(const Operator& h, const StateVector& psi0, const std::vector<double>& times, double tol = 1e-9,
                         const EvolveOptions& options = {}) {
  return evolve(h, psi0, std::span<const double>(times), tol, options);
}

inline constexpr std::size_t kDenseLimit = 200;

/// exp(-iHt) by Hermitian eigendecomposition; limited to small spaces.
inline DenseMatrix propagator_dense(const Operator& h, double t) {
  if (h.dim() > kDenseLimit)
    throw std::invalid_argument("dense propagator limited to dimension " + std::to_string(kDenseLimit));
  detail::check_hermitian(h);
  const DenseMatrix dense = DenseMatrix(h.matrix());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(dense);
  Eigen::VectorXcd phases(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::polar(1.0, -t * es.eigenvalues()(k));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Dense counterpart of evolve(), for cross-checks.
inline Trajectory evolve_dense(const Operator& h, const StateVector& psi0, std::span<const double> times) {
  if (!(h.space() == psi0.space())) throw std::invalid_argument("Hamiltonian and initial state differ in space");
  detail::check_times(times);
  if (h.dim() > kDenseLimit)
    throw std::invalid_argument("dense propagator limited to dimension " + std::to_string(kDenseLimit));
  detail::check_hermitian(h);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es{DenseMatrix(h.matrix())};
  const Eigen::VectorXcd c0 = es.eigenvectors().adjoint() * psi0.amplitudes();
  Trajectory traj;
  traj.times.assign(times.begin(), times.end());
  for (double t : times) {
    Eigen::VectorXcd c(c0.size());
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = c0(k) * std::polar(1.0, -t * es.eigenvalues()(k));
    traj.states.emplace_back(psi0.space(), es.eigenvectors() * c);
  }
  return traj;
}

/// p_k(t) for each basis state. Basis states on the full space give
/// |<basis_k|psi(t)>|^2; basis states on a subsystem space give the marginal
/// <basis_k| Tr_rest |psi><psi| |basis_k>.
inline std::vector<std::vector<double>> record_probabilities(const Trajectory& traj,
                                                             std::span<const StateVector> basis) {
  if (traj.states.size() != traj.times.size()) throw std::invalid_argument("trajectory has no stored states");
  for (const auto& b : basis)
    if (std::abs(b.norm() - 1.0) > 1e-12) throw std::invalid_argument("basis state is not normalized");
  std::vector<std::vector<double>> out(basis.size(), std::vector<double>(traj.times.size()));
  for (std::size_t t = 0; t < traj.states.size(); ++t)
    for (std::size_t k = 0; k < basis.size(); ++k) {
      const auto& psi = traj.states[t];
      out[k][t] = basis[k].space() == psi.space() ? std::norm(basis[k].inner(psi)) : reduced_fidelity(psi, basis[k]);
    }
  return out;
}

}  // namespace phonon
