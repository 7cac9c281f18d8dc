#include "phonon/propagate.hpp"

#include "phonon/hamiltonians.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace phonon;
using Catch::Approx;

namespace {

Operator as_operator(const DenseMatrix& m) {
  const auto space = make_space({{Mode::a, static_cast<std::size_t>(m.rows())}});
  return Operator(space, m.sparseView());
}

}  // namespace

TEST_CASE("Krylov propagation agrees with the dense exponential", "[propagate][property]") {
  std::mt19937_64 rng(20240917);
  std::uniform_int_distribution<std::size_t> dim(2, 200);
  std::uniform_real_distribution<double> time(0.05, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = dim(rng);
    const DenseMatrix hd = oracle::random_hermitian(n, rng);
    const Operator h = as_operator(hd);
    const StateVector psi0(h.space(), oracle::random_state(n, rng));
    const double t = time(rng);
    const std::vector<double> times{0.0, t / 3.0, t};
    const auto traj = evolve(h, psi0, times, 1e-10);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Vector expected = oracle::expm_minus_i(hd, times[k]) * psi0.amplitudes();
      CHECK((traj.states[k].amplitudes() - expected).norm() < 1e-9);
    }
    CHECK(traj.max_norm_error < 1e-10);
  }
}

TEST_CASE("dense paths agree with the Pade oracle", "[propagate]") {
  std::mt19937_64 rng(5);
  const DenseMatrix hd = oracle::random_hermitian(40, rng);
  const Operator h = as_operator(hd);
  const DenseMatrix u = propagator_dense(h, 0.7);
  CHECK((u - oracle::expm_minus_i(hd, 0.7)).cwiseAbs().maxCoeff() < 1e-11);
  CHECK((u * u.adjoint() - DenseMatrix::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-12);

  const StateVector psi0(h.space(), oracle::random_state(40, rng));
  const std::vector<double> times{0.0, 0.3, 0.7};
  const auto traj = evolve_dense(h, psi0, times);
  CHECK((traj.states[2].amplitudes() - u * psi0.amplitudes()).norm() < 1e-11);

  CHECK_THROWS_AS(propagator_dense(identity(make_space({{Mode::a, 15}, {Mode::b, 15}})), 1.0), std::invalid_argument);
}

TEST_CASE("trilinear exchange oscillates between two levels", "[propagate]") {
  // |0,1,1> couples only to |1,0,0> with strength xi, so p_{011}(t) = cos^2(xi t).
  HamiltonianSpec spec;
  spec.kind = HamiltonianKind::trilinear;
  spec.xi = khz_to_angular(7.2);
  spec.n_max = Truncation::uniform(4);
  const Operator h = build_hamiltonian(spec);
  const auto psi0 = fock_state(h.space(), {{Mode::b, 1}, {Mode::c, 1}});
  std::vector<double> times;
  for (int k = 0; k <= 40; ++k) times.push_back(0.005 * k);
  const auto traj = evolve(h, psi0, times, 1e-10);
  const auto p = record_probabilities(traj, std::vector<StateVector>{psi0});
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(p[0][k] == Approx(std::pow(std::cos(spec.xi * times[k]), 2)).margin(1e-9));
}

TEST_CASE("edge cases", "[propagate]") {
  const auto space = make_space({{Mode::a, 4}, {Mode::b, 4}});
  const auto psi0 = fock_state(space, {{Mode::a, 2}});

  SECTION("zero Hamiltonian returns the initial state at every time") {
    const std::vector<double> times{0.0, 1.0, 5.0};
    const auto traj = evolve(zero_operator(space), psi0, times);
    for (const auto& s : traj.states) CHECK((s.amplitudes() - psi0.amplitudes()).norm() == 0.0);
  }
  SECTION("t = 0 only returns the initial state") {
    const auto h = number(space, Mode::a) + number(space, Mode::b);
    const auto traj = evolve(h, psi0, std::vector<double>{0.0});
    CHECK((traj.states[0].amplitudes() - psi0.amplitudes()).norm() == 0.0);
  }
  SECTION("precondition violations") {
    const auto h = number(space, Mode::a);
    CHECK_THROWS_AS(evolve(h, psi0, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, psi0, std::vector<double>{-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, psi0, std::vector<double>{1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, psi0, std::vector<double>{0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, psi0, std::vector<double>{1.0}, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, psi0, std::vector<double>{1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, 2.0 * psi0, std::vector<double>{1.0}), std::invalid_argument);
    const Operator skew(space, (cplx(0.0, 1.0) * h).matrix());
    const Operator non_hermitian = h + Operator(space, ladder(space, Mode::a).matrix());
    CHECK_THROWS_AS(evolve(skew, psi0, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(evolve(non_hermitian, psi0, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(evolve(h, fock_state(make_space({{Mode::a, 4}}), {}), std::vector<double>{1.0}),
                    std::invalid_argument);
  }
}

TEST_CASE("observer and storage options", "[propagate]") {
  std::mt19937_64 rng(8);
  const Operator h = as_operator(oracle::random_hermitian(30, rng));
  const StateVector psi0(h.space(), oracle::random_state(30, rng));
  std::vector<double> seen;
  EvolveOptions opts;
  opts.store_states = false;
  opts.observer = [&](std::size_t k, double t, const StateVector& s) {
    CHECK(k == seen.size());
    CHECK(std::abs(s.norm() - 1.0) < 1e-10);
    seen.push_back(t);
  };
  const std::vector<double> times{0.0, 0.1, 0.2, 0.4};
  const auto traj = evolve(h, psi0, times, 1e-9, opts);
  CHECK(traj.states.empty());
  CHECK(seen == times);
  CHECK_THROWS_AS(record_probabilities(traj, std::vector<StateVector>{psi0}), std::invalid_argument);
}

TEST_CASE("marginal probabilities on a subsystem", "[propagate]") {
  const auto space = make_space({{Mode::a, 3}, {Mode::b, 3}});
  const auto psi = std::sqrt(0.25) * fock_state(space, {{Mode::a, 1}}) +
                   std::sqrt(0.75) * fock_state(space, {{Mode::a, 1}, {Mode::b, 2}});
  const auto traj = evolve(zero_operator(space), psi, std::vector<double>{0.0});
  const auto a_only = make_space({{Mode::a, 3}});
  const auto p = record_probabilities(traj, std::vector<StateVector>{fock_state(a_only, {{Mode::a, 1}}),
                                                                     fock_state(a_only, {})});
  CHECK(p[0][0] == Approx(1.0));
  CHECK(p[1][0] == Approx(0.0).margin(1e-15));
}

TEST_CASE("trajectory records", "[propagate]") {
  Trajectory traj;
  traj.times = {0.0, 1.0};
  traj.add_record("x", {1.0, 2.0});
  traj.add_record("x", {3.0, 4.0});
  CHECK(traj.records.size() == 1);
  CHECK(traj.record("x")[1] == 4.0);
  CHECK(traj.has_record("x"));
  CHECK_FALSE(traj.has_record("y"));
  CHECK_THROWS_AS(traj.record("y"), std::out_of_range);
  CHECK_THROWS_AS(traj.add_record("z", {1.0}), std::invalid_argument);
}
