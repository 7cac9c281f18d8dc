#include "phonon/hamiltonians.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace phonon;
using Catch::Approx;

namespace {

HamiltonianSpec make(HamiltonianKind kind, std::size_t n_max = 3) {
  HamiltonianSpec s;
  s.kind = kind;
  s.xi = khz_to_angular(7.2);
  s.omega = khz_to_angular(20.0);
  s.drive = khz_to_angular(1.5);
  s.phi = 0.4;
  s.g_b = khz_to_angular(2.0);
  s.eta_b = 0.06;
  s.n_max = Truncation::uniform(n_max);
  return s;
}

cplx element(const Operator& h, std::initializer_list<std::size_t> row, std::initializer_list<std::size_t> col) {
  const auto& s = h.space();
  return h.element(s.index(std::vector<std::size_t>(row)), s.index(std::vector<std::size_t>(col)));
}

}  // namespace

TEST_CASE("unit conversion", "[hamiltonians]") {
  CHECK(khz_to_angular(1.0) == Approx(2.0 * std::numbers::pi));
  CHECK(angular_to_khz(khz_to_angular(7.23796119919479)) == Approx(7.23796119919479).epsilon(1e-15));
  CHECK_THROWS_AS(khz_to_angular(-1.0), std::invalid_argument);
}

TEST_CASE("kind names round trip", "[hamiltonians]") {
  for (auto k : {HamiltonianKind::trilinear, HamiltonianKind::driven_a, HamiltonianKind::driven_b,
                 HamiltonianKind::spin_conditional, HamiltonianKind::effective_tmss, HamiltonianKind::effective_bs})
    CHECK(parse_kind(kind_name(k)) == k);
  CHECK_THROWS_AS(parse_kind("mystery"), std::invalid_argument);
}

TEST_CASE("every builder is exactly Hermitian", "[hamiltonians][property]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> rate(0.0, 100.0), phase(-4.0, 4.0), eta(0.0, 0.3);
  for (auto k : {HamiltonianKind::trilinear, HamiltonianKind::driven_a, HamiltonianKind::driven_b,
                 HamiltonianKind::spin_conditional, HamiltonianKind::effective_tmss, HamiltonianKind::effective_bs}) {
    for (int trial = 0; trial < 5; ++trial) {
      HamiltonianSpec s = make(k, 4);
      s.xi = rate(rng), s.omega = rate(rng) + 1.0, s.drive = rate(rng), s.g_b = rate(rng);
      s.phi = phase(rng), s.eta_b = eta(rng);
      s.include_residual = s.include_ac_stark = trial % 2 == 0;
      CHECK(build_hamiltonian(s).hermiticity_defect() == 0.0);
    }
  }
}

TEST_CASE("trilinear coupling", "[hamiltonians]") {
  const auto s = make(HamiltonianKind::trilinear, 3);
  const auto h = build_trilinear(s);
  CHECK(h.space().dim() == 64);
  CHECK(element(h, {1, 0, 0}, {0, 1, 1}) == cplx(s.xi));
  CHECK(std::abs(element(h, {2, 1, 0}, {1, 2, 1}) - cplx(s.xi * std::sqrt(2.0 * 2.0 * 1.0))) < 1e-12);
  CHECK(element(h, {0, 0, 0}, {0, 0, 0}) == cplx(0.0));

  // Conserved quantities n_a + n_b and n_a + n_c.
  const auto sp = h.space();
  const auto na = number(sp, Mode::a), nb = number(sp, Mode::b), nc = number(sp, Mode::c);
  CHECK(commutator(h, na + nb).max_abs() < 1e-12 * h.max_abs());
  CHECK(commutator(h, na + nc).max_abs() < 1e-12 * h.max_abs());
}

TEST_CASE("driven Hamiltonians", "[hamiltonians]") {
  SECTION("driven a") {
    const auto s = make(HamiltonianKind::driven_a);
    const auto h = build_driven_a(s);
    CHECK(element(h, {2, 0, 0}, {2, 0, 0}).real() == Approx(2.0 * s.omega));
    CHECK(std::abs(element(h, {1, 0, 0}, {0, 0, 0}) - s.drive * std::polar(1.0, s.phi)) < 1e-12);
    CHECK(std::abs(element(h, {0, 0, 0}, {1, 0, 0}) - s.drive * std::polar(1.0, -s.phi)) < 1e-12);
  }
  SECTION("driven b") {
    const auto s = make(HamiltonianKind::driven_b);
    const auto h = build_driven_b(s);
    CHECK(element(h, {0, 3, 0}, {0, 3, 0}).real() == Approx(-3.0 * s.omega));
    CHECK(std::abs(element(h, {0, 1, 0}, {0, 0, 0}) - s.drive * std::polar(1.0, s.phi)) < 1e-12);
    CHECK(element(h, {1, 0, 0}, {0, 1, 1}) == cplx(s.xi));
  }
  SECTION("wrong kind is rejected") {
    CHECK_THROWS_AS(build_driven_a(make(HamiltonianKind::driven_b)), std::invalid_argument);
  }
}

TEST_CASE("Lamb-Dicke diagonal", "[hamiltonians]") {
  SECTION("matches the generalized Laguerre form") {
    for (double eta : {0.0, 0.06, 0.2379, 0.5}) {
      const auto f = lamb_dicke_diagonal(eta, 20);
      for (unsigned m = 0; m <= 20; ++m) {
        const double expected = std::assoc_laguerre(m, 1, eta * eta) * std::exp(-eta * eta / 2.0) / (m + 1.0);
        CHECK(f[m] == Approx(expected).epsilon(1e-12).margin(1e-15));
      }
    }
  }
  SECTION("reference value and trivial limit") {
    CHECK(lamb_dicke_diagonal(0.06, 0)[0] == Approx(0.998201619028437).epsilon(1e-14));
    for (double x : lamb_dicke_diagonal(0.0, 10)) CHECK(x == 1.0);
  }
  SECTION("operator is diagonal on a b-only space") {
    const auto op = lamb_dicke_operator(0.1, 5);
    CHECK(op.space().labels() == std::vector<Mode>{Mode::b});
    CHECK(op.matrix().nonZeros() == 6);
  }
  CHECK_THROWS_AS(lamb_dicke_diagonal(1.0, 3), std::invalid_argument);
}

TEST_CASE("spin-conditional Hamiltonian", "[hamiltonians]") {
  auto s = make(HamiltonianKind::spin_conditional);
  const auto h = build_spin_conditional(s);
  CHECK(h.space().labels() == std::vector<Mode>{Mode::spin, Mode::a, Mode::b, Mode::c});
  const auto f = lamb_dicke_diagonal(s.eta_b, 3);

  // Spin up drives b with b^dagger F + F b; spin down only sees detuning and trilinear terms.
  CHECK(std::abs(element(h, {0, 0, 1, 0}, {0, 0, 0, 0}) - s.g_b * f[0]) < 1e-12);
  CHECK(std::abs(element(h, {0, 0, 2, 0}, {0, 0, 1, 0}) - s.g_b * std::sqrt(2.0) * f[1]) < 1e-12);
  CHECK(element(h, {1, 0, 1, 0}, {1, 0, 0, 0}) == cplx(0.0));
  CHECK(element(h, {1, 0, 2, 0}, {1, 0, 2, 0}).real() == Approx(-2.0 * s.omega));
  CHECK(element(h, {0, 1, 0, 0}, {1, 0, 1, 1}) == cplx(0.0));

  // The spin population is conserved.
  CHECK(commutator(h, spin_projector(h.space(), Spin::up)).max_abs() == 0.0);

  SECTION("AC-Stark compensation shifts only the up block") {
    s.include_ac_stark = true;
    const auto h2 = build_spin_conditional(s);
    const DenseMatrix diff = oracle::dense(h2 - h);
    const auto& sp = h.space();
    for (std::size_t i = 0; i < sp.dim(); ++i) {
      const double expected = sp.digits(i)[0] == 0 ? -s.g_b * s.g_b / s.omega : 0.0;
      CHECK(diff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real() == Approx(expected).margin(1e-12));
    }
  }
  SECTION("requires a spin subsystem") {
    CHECK_THROWS_AS(build_spin_conditional(s, make_space({{Mode::a, 2}, {Mode::b, 2}, {Mode::c, 2}})),
                    std::invalid_argument);
  }
}

TEST_CASE("effective Hamiltonians", "[hamiltonians]") {
  SECTION("squeezing coupling") {
    const auto s = make(HamiltonianKind::effective_tmss);
    const auto h = build_effective_tmss(s);
    const double rate = s.drive * s.xi / s.omega;
    CHECK(std::abs(element(h, {0, 1, 1}, {0, 0, 0}) + rate * std::polar(1.0, s.phi)) < 1e-12);
    CHECK(effective_rate(s) == Approx(rate));
  }
  SECTION("beam-splitter coupling") {
    const auto s = make(HamiltonianKind::effective_bs);
    const auto h = build_effective_bs(s);
    const double rate = s.drive * s.xi / s.omega;
    CHECK(std::abs(element(h, {1, 0, 0}, {0, 0, 1}) - rate * std::polar(1.0, s.phi)) < 1e-12);
    CHECK(element(h, {0, 1, 0}, {0, 1, 0}).real() == Approx(-s.omega));
  }
  SECTION("squeezing residual reproduces the exact second-order shift") {
    // Undriven, far-detuned trilinear coupling: |0, nb, nc> is pushed by -xi^2 nb nc / omega.
    HamiltonianSpec exact = make(HamiltonianKind::driven_a, 3);
    exact.drive = 0.0, exact.xi = 1.0, exact.omega = 200.0;
    HamiltonianSpec eff = exact;
    eff.kind = HamiltonianKind::effective_tmss, eff.include_residual = true;
    const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(oracle::dense(build_driven_a(exact)));
    const DenseMatrix he = oracle::dense(build_effective_tmss(eff));
    const auto& sp = build_effective_tmss(eff).space();
    for (std::size_t nb = 0; nb <= 3; ++nb)
      for (std::size_t nc = 0; nc <= 3; ++nc) {
        const auto i = static_cast<Eigen::Index>(sp.index(std::vector<std::size_t>{0, nb, nc}));
        Eigen::Index best = 0;
        (es.eigenvectors().row(i).cwiseAbs()).maxCoeff(&best);
        CHECK(es.eigenvalues()(best) == Approx(he(i, i).real()).epsilon(1e-3).margin(1e-12));
      }
  }
  SECTION("zero detuning is rejected") {
    auto s = make(HamiltonianKind::effective_bs);
    s.omega = 0.0;
    CHECK_THROWS_AS(build_effective_bs(s), std::invalid_argument);
    CHECK_THROWS_AS(effective_rate(s), std::invalid_argument);
  }
}

TEST_CASE("spec validation and advisory", "[hamiltonians]") {
  auto s = make(HamiltonianKind::driven_a);
  s.xi = khz_to_angular(5.0);
  CHECK_FALSE(s.weak_coupling_advisory());
  s.drive = s.omega;
  CHECK(s.weak_coupling_advisory());

  auto bad = make(HamiltonianKind::trilinear);
  bad.xi = -1.0;
  CHECK_THROWS_AS(build_hamiltonian(bad), std::invalid_argument);
  bad = make(HamiltonianKind::spin_conditional);
  bad.eta_b = 1.0;
  CHECK_THROWS_AS(build_hamiltonian(bad), std::invalid_argument);
  bad = make(HamiltonianKind::trilinear);
  bad.n_max.b = 0;
  CHECK_THROWS_AS(build_hamiltonian(bad), std::invalid_argument);
}
