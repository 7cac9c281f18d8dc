#pragma once

// Test-only reference computations, independent of the library's propagation
// paths: Pade matrix exponentials of dense matrices and brute-force helpers.

#include "phonon/fock.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <random>

namespace oracle {

using phonon::cplx;
using phonon::DenseMatrix;

/// exp(-i t H) by scaling and squaring.
inline DenseMatrix expm_minus_i(const DenseMatrix& h, double t) {
  const DenseMatrix x = cplx(0.0, -t) * h;
  return x.exp();
}

inline DenseMatrix dense(const phonon::Operator& op) { return DenseMatrix(op.matrix()); }

/// Random Hermitian matrix with entries of unit scale.
inline DenseMatrix random_hermitian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  DenseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = cplx(g(rng), g(rng));
  return (m + m.adjoint()) / 2.0;
}

inline phonon::Vector random_state(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  phonon::Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(g(rng), g(rng));
  return v / v.norm();
}

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace oracle
