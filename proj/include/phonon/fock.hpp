#pragma once

// Truncated Fock-space operator algebra: tensor-product spaces over an
// optional spin and up to three bosonic modes (a, b, c), sparse operators,
// pure states, reduced density matrices.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phonon {

using cplx = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Vector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;

/// Subsystem labels. The enumerator order is the canonical tensor order.
enum class Mode { spin = 0, a = 1, b = 2, c = 3 };

/// Spin basis: |up> is local index 0, |down> is local index 1.
enum class Spin { up = 0, down = 1 };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::spin: return "spin";
    case Mode::a: return "a";
    case Mode::b: return "b";
    case Mode::c: return "c";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "spin") return Mode::spin;
  if (s == "a") return Mode::a;
  if (s == "b") return Mode::b;
  if (s == "c") return Mode::c;
  throw std::invalid_argument("unknown subsystem label '" + std::string(s) + "'");
}

inline Spin parse_spin(std::string_view s) {
  if (s == "up") return Spin::up;
  if (s == "down") return Spin::down;
  throw std::invalid_argument("unknown spin state '" + std::string(s) + "'");
}

struct Subsystem {
  Mode label;
  std::size_t dim;

  bool operator==(const Subsystem&) const = default;
};

/// Ordered tensor product of subsystems. Index arithmetic is row-major with
/// the first subsystem (spin, when present) varying slowest.
class HilbertSpace {
 public:
  HilbertSpace() = default;

  explicit HilbertSpace(std::vector<Subsystem> subsystems) : subsystems_(std::move(subsystems)) {
    if (subsystems_.empty()) throw std::invalid_argument("a space needs at least one subsystem");
    std::sort(subsystems_.begin(), subsystems_.end(),
              [](const Subsystem& x, const Subsystem& y) { return x.label < y.label; });
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      const auto& s = subsystems_[i];
      if (i > 0 && subsystems_[i - 1].label == s.label)
        throw std::invalid_argument("duplicate subsystem label '" + std::string(mode_name(s.label)) + "'");
      if (s.dim == 0)
        throw std::invalid_argument("subsystem '" + std::string(mode_name(s.label)) + "' has zero dimension");
      if (s.label == Mode::spin && s.dim != 2) throw std::invalid_argument("spin subsystem must have dimension 2");
    }
    dim_ = 1;
    for (const auto& s : subsystems_) dim_ *= s.dim;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return subsystems_.size(); }
  const std::vector<Subsystem>& subsystems() const { return subsystems_; }

  bool contains(Mode m) const {
    return std::any_of(subsystems_.begin(), subsystems_.end(), [m](const Subsystem& s) { return s.label == m; });
  }

  std::size_t position(Mode m) const {
    for (std::size_t i = 0; i < subsystems_.size(); ++i)
      if (subsystems_[i].label == m) return i;
    throw std::invalid_argument("space has no subsystem '" + std::string(mode_name(m)) + "'");
  }

  std::size_t dim(Mode m) const { return subsystems_[position(m)].dim; }
  std::size_t n_max(Mode m) const { return dim(m) - 1; }

  /// Distance in the flat index between neighbouring levels of `m`.
  std::size_t stride(Mode m) const {
    std::size_t s = 1;
    for (std::size_t i = position(m) + 1; i < subsystems_.size(); ++i) s *= subsystems_[i].dim;
    return s;
  }

  std::vector<Mode> labels() const {
    std::vector<Mode> out;
    for (const auto& s : subsystems_) out.push_back(s.label);
    return out;
  }

  std::size_t index(std::span<const std::size_t> digits) const {
    if (digits.size() != subsystems_.size()) throw std::invalid_argument("multi-index has wrong length");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      if (digits[i] >= subsystems_[i].dim) throw std::out_of_range("multi-index digit out of range");
      idx = idx * subsystems_[i].dim + digits[i];
    }
    return idx;
  }

  std::vector<std::size_t> digits(std::size_t idx) const {
    if (idx >= dim_) throw std::out_of_range("flat index out of range");
    std::vector<std::size_t> out(subsystems_.size());
    for (std::size_t i = subsystems_.size(); i-- > 0;) {
      out[i] = idx % subsystems_[i].dim;
      idx /= subsystems_[i].dim;
    }
    return out;
  }

  /// The space spanned by the listed subsystems, in canonical order.
  HilbertSpace restrict_to(std::span<const Mode> keep) const {
    std::vector<Subsystem> out;
    for (Mode m : keep) out.push_back(subsystems_[position(m)]);
    return HilbertSpace(std::move(out));
  }

  bool operator==(const HilbertSpace&) const = default;

 private:
  std::vector<Subsystem> subsystems_;
  std::size_t dim_ = 0;
};

inline HilbertSpace make_space(std::vector<Subsystem> subsystems) { return HilbertSpace(std::move(subsystems)); }

/// Sparse operator bound to a space. Immutable once built.
class Operator {
 public:
  Operator(HilbertSpace space, SparseMatrix m) : space_(std::move(space)), matrix_(std::move(m)) {
    const auto n = static_cast<Eigen::Index>(space_.dim());
    if (matrix_.rows() != n || matrix_.cols() != n) throw std::invalid_argument("operator size does not match its space");
    matrix_.makeCompressed();
  }

  const HilbertSpace& space() const { return space_; }
  const SparseMatrix& matrix() const { return matrix_; }
  std::size_t dim() const { return space_.dim(); }

  cplx element(std::size_t row, std::size_t col) const {
    return matrix_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }

  Operator adjoint() const { return Operator(space_, SparseMatrix(matrix_.adjoint())); }

  /// max |X - X^dagger| over all entries.
  double hermiticity_defect() const {
    SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
  }

  double max_abs() const {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst;
  }

  friend Operator operator+(const Operator& x, const Operator& y) {
    check_same(x, y);
    return Operator(x.space_, SparseMatrix(x.matrix_ + y.matrix_));
  }
  friend Operator operator-(const Operator& x, const Operator& y) {
    check_same(x, y);
    return Operator(x.space_, SparseMatrix(x.matrix_ - y.matrix_));
  }
  friend Operator operator*(const Operator& x, const Operator& y) {
    check_same(x, y);
    return Operator(x.space_, SparseMatrix(x.matrix_ * y.matrix_));
  }
  friend Operator operator*(cplx s, const Operator& x) { return Operator(x.space_, SparseMatrix(s * x.matrix_)); }
  friend Operator operator*(double s, const Operator& x) { return cplx(s) * x; }

 private:
  static void check_same(const Operator& x, const Operator& y) {
    if (!(x.space_ == y.space_)) throw std::invalid_argument("operators live on different spaces");
  }

  HilbertSpace space_;
  SparseMatrix matrix_;
};

/// Lifts a local operator on subsystem `m` to the full space (identity elsewhere).
inline Operator embed(const HilbertSpace& space, Mode m, const SparseMatrix& local) {
  const std::size_t d = space.dim(m);
  if (static_cast<std::size_t>(local.rows()) != d || static_cast<std::size_t>(local.cols()) != d)
    throw std::invalid_argument("local operator does not match subsystem dimension");
  const std::size_t inner = space.stride(m);
  const std::size_t outer = space.dim() / (d * inner);
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(local.nonZeros()) * inner * outer);
  for (std::size_t o = 0; o < outer; ++o)
    for (Eigen::Index k = 0; k < local.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(local, k); it; ++it) {
        const auto i = static_cast<std::size_t>(it.row());
        const auto j = static_cast<std::size_t>(it.col());
        for (std::size_t in = 0; in < inner; ++in)
          trips.emplace_back(static_cast<Eigen::Index>((o * d + i) * inner + in),
                             static_cast<Eigen::Index>((o * d + j) * inner + in), it.value());
      }
  const auto n = static_cast<Eigen::Index>(space.dim());
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return Operator(space, std::move(out));
}

inline Operator identity(const HilbertSpace& space) {
  const auto n = static_cast<Eigen::Index>(space.dim());
  SparseMatrix id(n, n);
  id.setIdentity();
  return Operator(space, std::move(id));
}

inline Operator zero_operator(const HilbertSpace& space) {
  const auto n = static_cast<Eigen::Index>(space.dim());
  return Operator(space, SparseMatrix(n, n));
}

/// Operator diagonal in the Fock basis of `m` with the given local entries.
inline Operator diagonal(const HilbertSpace& space, Mode m, std::span<const double> entries) {
  const std::size_t d = space.dim(m);
  if (entries.size() != d) throw std::invalid_argument("diagonal entries do not match subsystem dimension");
  SparseMatrix local(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::vector<Eigen::Triplet<cplx>> trips;
  for (std::size_t i = 0; i < d; ++i)
    if (entries[i] != 0.0) trips.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), entries[i]);
  local.setFromTriplets(trips.begin(), trips.end());
  return embed(space, m, local);
}

/// Annihilation operator of bosonic mode `m`: <n-1|a|n> = sqrt(n), hard-truncated at n_max.
inline Operator ladder(const HilbertSpace& space, Mode m) {
  if (m == Mode::spin) throw std::invalid_argument("ladder operators are defined for bosonic modes only");
  const std::size_t d = space.dim(m);
  SparseMatrix local(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::vector<Eigen::Triplet<cplx>> trips;
  for (std::size_t n = 1; n < d; ++n)
    trips.emplace_back(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n), std::sqrt(static_cast<double>(n)));
  local.setFromTriplets(trips.begin(), trips.end());
  return embed(space, m, local);
}

/// a^dagger a, built directly as the exact integer diagonal 0..n_max.
inline Operator number(const HilbertSpace& space, Mode m) {
  if (m == Mode::spin) throw std::invalid_argument("number operators are defined for bosonic modes only");
  std::vector<double> diag(space.dim(m));
  for (std::size_t n = 0; n < diag.size(); ++n) diag[n] = static_cast<double>(n);
  return diagonal(space, m, diag);
}

/// |s><s| on the spin subsystem.
inline Operator spin_projector(const HilbertSpace& space, Spin s) {
  std::vector<double> diag(2, 0.0);
  diag[static_cast<std::size_t>(s)] = 1.0;
  return diagonal(space, Mode::spin, diag);
}

inline Operator commutator(const Operator& x, const Operator& y) { return x * y - y * x; }

class StateVector {
 public:
  StateVector(HilbertSpace space, Vector amplitudes) : space_(std::move(space)), amps_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amps_.size()) != space_.dim())
      throw std::invalid_argument("amplitude vector does not match its space");
  }

  const HilbertSpace& space() const { return space_; }
  const Vector& amplitudes() const { return amps_; }
  std::size_t dim() const { return space_.dim(); }
  double norm() const { return amps_.norm(); }

  cplx amplitude(std::span<const std::size_t> digits) const {
    return amps_(static_cast<Eigen::Index>(space_.index(digits)));
  }

  StateVector normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("cannot normalize the zero vector");
    return StateVector(space_, amps_ / n);
  }

  /// <this|other>
  cplx inner(const StateVector& other) const {
    if (!(space_ == other.space_)) throw std::invalid_argument("states live on different spaces");
    return amps_.dot(other.amps_);
  }

  friend StateVector operator+(const StateVector& x, const StateVector& y) {
    if (!(x.space_ == y.space_)) throw std::invalid_argument("states live on different spaces");
    return StateVector(x.space_, x.amps_ + y.amps_);
  }
  friend StateVector operator*(cplx s, const StateVector& x) { return StateVector(x.space_, s * x.amps_); }

 private:
  HilbertSpace space_;
  Vector amps_;
};

/// Basis state. Modes not listed in `occupations` are in their vacuum.
inline StateVector fock_state(const HilbertSpace& space, const std::map<Mode, std::size_t>& occupations,
                              std::optional<Spin> spin = std::nullopt) {
  std::vector<std::size_t> digits(space.size(), 0);
  for (const auto& [m, n] : occupations) {
    if (m == Mode::spin) throw std::invalid_argument("spin is set through the spin argument, not as an occupation");
    const std::size_t pos = space.position(m);
    if (n > space.n_max(m))
      throw std::invalid_argument("occupation " + std::to_string(n) + " exceeds truncation n_max=" +
                                  std::to_string(space.n_max(m)) + " of mode " + std::string(mode_name(m)));
    digits[pos] = n;
  }
  if (space.contains(Mode::spin)) {
    if (!spin) throw std::invalid_argument("space contains a spin; a spin state is required");
    digits[space.position(Mode::spin)] = static_cast<std::size_t>(*spin);
  } else if (spin) {
    throw std::invalid_argument("spin state given but the space has no spin");
  }
  Vector amps = Vector::Zero(static_cast<Eigen::Index>(space.dim()));
  amps(static_cast<Eigen::Index>(space.index(digits))) = 1.0;
  return StateVector(space, std::move(amps));
}

class DensityMatrix {
 public:
  DensityMatrix(HilbertSpace space, DenseMatrix entries) : space_(std::move(space)), rho_(std::move(entries)) {
    const auto n = static_cast<Eigen::Index>(space_.dim());
    if (rho_.rows() != n || rho_.cols() != n) throw std::invalid_argument("density matrix does not match its space");
  }

  static DensityMatrix pure(const StateVector& psi) {
    return DensityMatrix(psi.space(), psi.amplitudes() * psi.amplitudes().adjoint());
  }

  const HilbertSpace& space() const { return space_; }
  const DenseMatrix& matrix() const { return rho_; }
  cplx trace() const { return rho_.trace(); }
  double hermiticity_defect() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(rho_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  double purity() const { return (rho_ * rho_).trace().real(); }

 private:
  HilbertSpace space_;
  DenseMatrix rho_;
};

namespace detail {

/// Splits every flat index of `full` into (kept index, traced index).
struct SubsystemSplit {
  HilbertSpace kept;
  std::size_t rest_dim = 1;
  std::vector<std::size_t> kept_of;
  std::vector<std::size_t> rest_of;

  SubsystemSplit(const HilbertSpace& full, std::span<const Mode> keep) : kept(full.restrict_to(keep)) {
    std::vector<bool> is_kept(full.size(), false);
    for (Mode m : keep) is_kept[full.position(m)] = true;
    for (std::size_t i = 0; i < full.size(); ++i)
      if (!is_kept[i]) rest_dim *= full.subsystems()[i].dim;
    kept_of.resize(full.dim());
    rest_of.resize(full.dim());
    std::vector<std::size_t> digits(full.size(), 0);
    for (std::size_t idx = 0; idx < full.dim(); ++idx) {
      std::size_t k = 0, r = 0;
      for (std::size_t i = 0; i < full.size(); ++i) {
        const std::size_t d = full.subsystems()[i].dim;
        if (is_kept[i]) k = k * d + digits[i];
        else r = r * d + digits[i];
      }
      kept_of[idx] = k;
      rest_of[idx] = r;
      for (std::size_t i = full.size(); i-- > 0;) {
        if (++digits[i] < full.subsystems()[i].dim) break;
        digits[i] = 0;
      }
    }
  }
};

inline void check_keep(const HilbertSpace& space, std::span<const Mode> keep) {
  if (keep.empty()) throw std::invalid_argument("partial trace needs a nonempty keep set");
  for (Mode m : keep) (void)space.position(m);
}

}  // namespace detail

/// Reduced state on the `keep` subsystems, tracing out the rest.
inline DensityMatrix partial_trace(const StateVector& psi, std::span<const Mode> keep) {
  detail::check_keep(psi.space(), keep);
  detail::SubsystemSplit split(psi.space(), keep);
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(split.kept.dim()), static_cast<Eigen::Index>(split.rest_dim));
  for (std::size_t i = 0; i < psi.dim(); ++i)
    m(static_cast<Eigen::Index>(split.kept_of[i]), static_cast<Eigen::Index>(split.rest_of[i])) =
        psi.amplitudes()(static_cast<Eigen::Index>(i));
  return DensityMatrix(split.kept, m * m.adjoint());
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const Mode> keep) {
  detail::check_keep(rho.space(), keep);
  detail::SubsystemSplit split(rho.space(), keep);
  const auto kd = static_cast<Eigen::Index>(split.kept.dim());
  // full_of[k * rest_dim + r] is the flat index of (k, r)
  std::vector<std::size_t> full_of(rho.space().dim());
  for (std::size_t i = 0; i < full_of.size(); ++i) full_of[split.kept_of[i] * split.rest_dim + split.rest_of[i]] = i;
  DenseMatrix out = DenseMatrix::Zero(kd, kd);
  for (Eigen::Index k1 = 0; k1 < kd; ++k1)
    for (Eigen::Index k2 = 0; k2 < kd; ++k2) {
      cplx acc = 0.0;
      for (std::size_t r = 0; r < split.rest_dim; ++r)
        acc += rho.matrix()(static_cast<Eigen::Index>(full_of[static_cast<std::size_t>(k1) * split.rest_dim + r]),
                            static_cast<Eigen::Index>(full_of[static_cast<std::size_t>(k2) * split.rest_dim + r]));
      out(k1, k2) = acc;
    }
  return DensityMatrix(split.kept, std::move(out));
}

inline DensityMatrix partial_trace(const StateVector& psi, std::initializer_list<Mode> keep) {
  return partial_trace(psi, std::span<const Mode>(keep.begin(), keep.size()));
}
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<Mode> keep) {
  return partial_trace(rho, std::span<const Mode>(keep.begin(), keep.size()));
}

/// <target|rho|target>
inline double fidelity(const DensityMatrix& rho, const StateVector& target) {
  if (!(rho.space() == target.space())) throw std::invalid_argument("fidelity: density matrix and target differ in space");
  const auto& t = target.amplitudes();
  return t.dot(rho.matrix() * t).real();
}

/// <target| Tr_rest |psi><psi| |target>, where the target's space names the
/// kept subsystems. Equivalent to fidelity(partial_trace(psi, keep), target)
/// without forming the reduced density matrix.
inline double reduced_fidelity(const StateVector& psi, const StateVector& target) {
  const auto keep = target.space().labels();
  if (!(psi.space().restrict_to(keep) == target.space()))
    throw std::invalid_argument("target space is not a subsystem of the state's space");
  detail::SubsystemSplit split(psi.space(), keep);
  Vector v = Vector::Zero(static_cast<Eigen::Index>(split.rest_dim));
  const auto& t = target.amplitudes();
  const auto& p = psi.amplitudes();
  for (std::size_t i = 0; i < psi.dim(); ++i)
    v(static_cast<Eigen::Index>(split.rest_of[i])) +=
        std::conj(t(static_cast<Eigen::Index>(split.kept_of[i]))) * p(static_cast<Eigen::Index>(i));
  return v.squaredNorm();
}

/// <psi|X|psi>
inline cplx expectation(const StateVector& psi, const Operator& x) {
  if (!(psi.space() == x.space())) throw std::invalid_argument("expectation: state and operator differ in space");
  return psi.amplitudes().dot(x.matrix() * psi.amplitudes());
}

/// Largest population of the top Fock level of `m`, a truncation diagnostic.
inline double top_level_population(const StateVector& psi, Mode m) {
  const auto& space = psi.space();
  const std::size_t stride = space.stride(m);
  const std::size_t d = space.dim(m);
  double p = 0.0;
  for (std::size_t i = 0; i < psi.dim(); ++i)
    if ((i / stride) % d == d - 1) p += std::norm(psi.amplitudes()(static_cast<Eigen::Index>(i)));
  return p;
}

}  // namespace phonon
