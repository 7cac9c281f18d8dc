#include "phonon/analytic.hpp"

#include "phonon/hamiltonians.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

using namespace phonon;
using Catch::Approx;

namespace {

// Binomial-expansion oracle for the beam-splitter amplitude: expand
// (c a^dagger + ... ) directly on the number basis with exact factorials.
double bs_reference(int n1, int n2, int N1, int N2, double x) {
  double total = 0.0;
  for (int k = 0; k <= n1; ++k)
    for (int l = 0; l <= n2; ++l) {
      if (N1 != n2 + k - l || N2 != n1 - k + l) continue;
      const double sign = (n1 - k) % 2 == 0 ? 1.0 : -1.0;
      total += sign * std::pow(std::sin(x), n1 + n2 - k - l) * std::pow(std::cos(x), k + l) *
               std::sqrt(oracle::factorial(n1) * oracle::factorial(n2) * oracle::factorial(N1) * oracle::factorial(N2)) /
               (oracle::factorial(k) * oracle::factorial(n1 - k) * oracle::factorial(l) * oracle::factorial(n2 - l));
    }
  return total;
}

}  // namespace

TEST_CASE("tmss_prob", "[analytic]") {
  CHECK(tmss_prob(0, 0.0) == 1.0);
  CHECK(tmss_prob(3, 0.0) == 0.0);
  for (double r : {0.2, 0.88, 1.5}) {
    double sum = 0.0, mean = 0.0;
    for (int n = 0; n < 400; ++n) {
      sum += tmss_prob(n, r);
      mean += n * tmss_prob(n, r);
    }
    CHECK(sum == Approx(1.0).epsilon(1e-12));
    CHECK(mean == Approx(std::sinh(r) * std::sinh(r)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(tmss_prob(-1, 0.5), std::invalid_argument);
}

TEST_CASE("tmss_state", "[analytic]") {
  SECTION("amplitudes and normalization") {
    const auto s = tmss_state({0.5, 0.3}, 30);
    CHECK(s.state.norm() == Approx(1.0).epsilon(1e-14));
    CHECK(s.tail_mass < 1e-10);
    const std::size_t d11[2] = {1, 1};
    CHECK(std::abs(s.state.amplitude(d11) - std::polar(std::tanh(0.5) / std::cosh(0.5), 0.3)) < 1e-12);
  }
  SECTION("matches evolution under the squeezing Hamiltonian") {
    // -kappa (e^{i phi} b^dagger c^dagger + h.c.) for time t squeezes with r = kappa t, theta = phi + pi/2.
    const std::size_t n_max = 24;
    const double kappa = 0.5, t = 1.0, phi = 0.4;
    const auto space = make_space({{Mode::b, n_max + 1}, {Mode::c, n_max + 1}});
    const Operator b = ladder(space, Mode::b), c = ladder(space, Mode::c);
    const Operator y = (-kappa * std::polar(1.0, phi)) * (b.adjoint() * c.adjoint());
    const DenseMatrix h = oracle::dense(y + y.adjoint());
    const Vector evolved = oracle::expm_minus_i(h, t) * fock_state(space, {}).amplitudes();
    const auto target = tmss_state({kappa * t, phi + std::numbers::pi / 2.0}, space);
    CHECK(std::norm(target.state.amplitudes().dot(evolved)) == Approx(1.0).epsilon(1e-10));
  }
  SECTION("truncation too small for the squeezing") {
    CHECK_THROWS_AS(tmss_state({2.0, 0.0}, 5), std::invalid_argument);
    CHECK_NOTHROW(tmss_state({2.0, 0.0}, 5, 1.0));
  }
  CHECK_THROWS_AS(tmss_state({-0.1, 0.0}, 5), std::invalid_argument);
}

TEST_CASE("bs_coefficient", "[analytic]") {
  SECTION("zero angle is the identity") {
    for (int n1 = 0; n1 <= 4; ++n1)
      for (int n2 = 0; n2 <= 4; ++n2)
        for (int N1 = 0; N1 <= n1 + n2; ++N1)
          CHECK(bs_coefficient(n1, n2, N1, n1 + n2 - N1, 0.0) == Approx(N1 == n1 ? 1.0 : 0.0).margin(1e-14));
  }
  SECTION("quarter turn swaps the modes") {
    for (int n1 = 0; n1 <= 5; ++n1)
      for (int n2 = 0; n2 <= 5; ++n2)
        CHECK(bs_coefficient(n1, n2, n2, n1, std::numbers::pi / 2.0) ==
              Approx(n1 % 2 == 0 ? 1.0 : -1.0).margin(1e-12));
  }
  SECTION("number conservation") {
    CHECK(bs_coefficient(2, 1, 2, 2, 0.3) == 0.0);
    CHECK_THROWS_AS(bs_coefficient(-1, 0, 0, 0, 0.3), std::invalid_argument);
  }
  SECTION("agrees with the double-sum expansion and is unitary") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> angle(-3.0, 3.0);
    for (int trial = 0; trial < 40; ++trial) {
      const double x = angle(rng);
      const int n1 = trial % 6, n2 = (trial / 6) % 5;
      double total = 0.0;
      for (int N1 = 0; N1 <= n1 + n2; ++N1) {
        const double cf = bs_coefficient(n1, n2, N1, n1 + n2 - N1, x);
        CHECK(cf == Approx(bs_reference(n1, n2, N1, n1 + n2 - N1, x)).margin(1e-12));
        total += cf * cf;
      }
      CHECK(total == Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("bs_final_state matches evolution under the beam-splitter Hamiltonian", "[analytic]") {
  const double eps = 0.8;
  for (double phi : {0.0, 0.7, -2.1})
    for (auto [n1, n2] : {std::pair{1, 0}, std::pair{2, 2}, std::pair{3, 1}, std::pair{0, 4}}) {
      const auto expected = bs_final_state(n1, n2, {eps, phi}, 1.3);
      const auto& space = expected.space();
      const Operator a = ladder(space, Mode::a), c = ladder(space, Mode::c);
      const Operator y = (eps * std::polar(1.0, phi)) * (a.adjoint() * c);
      const Vector evolved = oracle::expm_minus_i(oracle::dense(y + y.adjoint()), 1.3) *
                             fock_state(space, {{Mode::a, static_cast<std::size_t>(n1)},
                                                {Mode::c, static_cast<std::size_t>(n2)}})
                                 .amplitudes();
      CHECK((expected.amplitudes() - evolved).norm() < 1e-11);
    }
  CHECK_THROWS_AS(bs_final_state(2, 2, {eps, 0.0}, 1.0, 3), std::invalid_argument);
  CHECK(bs_final_state(2, 2, {eps, 0.0}, 1.0, 6).space().dim() == 49);
}

TEST_CASE("Fredkin gate", "[analytic]") {
  const std::size_t n_max = 4;
  const auto space = make_space({{Mode::spin, 2}, {Mode::a, n_max + 1}, {Mode::c, n_max + 1}});

  SECTION("spin down is untouched and spin up swaps with a phase") {
    const auto down = fock_state(space, {{Mode::a, 2}, {Mode::c, 1}}, Spin::down);
    CHECK((fredkin_apply(down).amplitudes() - down.amplitudes()).norm() == 0.0);
    const auto up = fock_state(space, {{Mode::a, 1}}, Spin::up);
    const auto out = fredkin_apply(up);
    CHECK(std::abs(fock_state(space, {{Mode::c, 1}}, Spin::up).inner(out) - cplx(0.0, -1.0)) < 1e-15);
  }
  SECTION("agrees with a completed beam-splitter swap") {
    const double eps = 1.1;
    for (int n1 = 0; n1 <= 2; ++n1)
      for (int n2 = 0; n2 <= 2; ++n2) {
        const auto swapped = bs_final_state(n1, n2, {eps, 0.0}, gate_time(eps), n_max);
        const auto gate = fredkin_apply(fock_state(space, {{Mode::a, static_cast<std::size_t>(n1)},
                                                            {Mode::c, static_cast<std::size_t>(n2)}},
                                                   Spin::up));
        const auto up_block = gate.amplitudes().head(static_cast<Eigen::Index>(swapped.space().dim()));
        CHECK((up_block - swapped.amplitudes()).norm() < 1e-12);
      }
  }
  SECTION("unitary on random states") {
    std::mt19937_64 rng(3);
    const StateVector psi(space, oracle::random_state(space.dim(), rng));
    CHECK(fredkin_apply(psi).norm() == Approx(1.0).epsilon(1e-14));
  }
  SECTION("builds N00N states from a spin superposition") {
    for (std::size_t n = 1; n <= 3; ++n) {
      const auto plus = std::sqrt(0.5) * (fock_state(space, {{Mode::a, n}}, Spin::down) +
                                          fock_state(space, {{Mode::a, n}}, Spin::up));
      CHECK(std::norm(noon_state(n, n_max).inner(fredkin_apply(plus))) == Approx(1.0).epsilon(1e-14));
    }
  }
  SECTION("errors") {
    CHECK_THROWS_AS(fredkin_apply(fock_state(make_space({{Mode::a, 2}, {Mode::c, 2}}), {})), std::invalid_argument);
    CHECK_THROWS_AS(fredkin_apply(fock_state(make_space({{Mode::spin, 2}, {Mode::a, 2}, {Mode::c, 3}}), {}, Spin::up)),
                    std::invalid_argument);
    CHECK_THROWS_AS(noon_state(5, 4), std::invalid_argument);
  }
}

TEST_CASE("gate_time", "[analytic]") {
  CHECK(gate_time(1.0) == Approx(std::numbers::pi / 2.0));
  // A conditional swap at eps_b = g_b xi / omega with g_b/2pi = 6.3 kHz, xi/2pi = 0.3 kHz, omega/2pi = 15.8 kHz.
  HamiltonianSpec spec;
  spec.kind = HamiltonianKind::spin_conditional;
  spec.g_b = khz_to_angular(6.3), spec.xi = khz_to_angular(0.3), spec.omega = khz_to_angular(15.8);
  CHECK(gate_time(effective_rate(spec)) == Approx(2.08994708994709).epsilon(1e-13));
  CHECK_THROWS_AS(gate_time(0.0), std::invalid_argument);
}
