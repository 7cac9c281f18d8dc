#pragma once

// Acceptance suite: figure-level physics checks on the built-in scenarios,
// oracle equivalences, metrology closed forms and a truncation-convergence check.

#include "phonon/experiment.hpp"

#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace phonon::acceptance {

struct CriterionResult {
  std::string id;
  bool pass = false;
  std::string detail;
};

struct Options {
  std::size_t jobs = 1;
  double tol = 1e-9;
  std::optional<std::size_t> nmax;  ///< uniform base truncation; scenario defaults otherwise
};

/// A scalar result with the tolerance it is judged against.
struct Metric {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Built-in scenario with every truncation raised by `shift`.
inline experiment::json scenario(std::string_view name, const Options& opt, std::size_t shift) {
  auto cfg = experiment::builtin_config(name);
  auto& n = cfg["hamiltonian"]["n_max"];
  if (opt.nmax) n = *opt.nmax;
  if (n.is_number()) {
    n = n.get<std::size_t>() + shift;
  } else {
    for (auto& [k, v] : n.items()) v = v.get<std::size_t>() + shift;
  }
  return cfg;
}

inline experiment::ExperimentResult run(experiment::json cfg, const Options& opt) {
  experiment::RunOptions ro;
  ro.jobs = opt.jobs;
  ro.tol = opt.tol;
  return experiment::run(cfg, ro);
}

inline double max_abs_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

inline const experiment::TrajectoryResult& by_state(const experiment::ExperimentResult& r, std::string_view label) {
  for (const auto& t : r.trajectories)
    if (t.state_label == label) return t;
  throw std::out_of_range("no trajectory for state " + std::string(label));
}

}  // namespace detail

/// Figure-level results, A1 through A6, at truncation shift `shift`.
struct PhysicsResults {
  std::vector<Metric> metrics;
  bool a2_monotone = false;
  std::vector<double> a2_fidelity;  ///< F(4 ms) at omega/2pi = 14, 17, 20 kHz

  const Metric& metric(std::string_view name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m;
    throw std::out_of_range("no metric " + std::string(name));
  }
};

inline PhysicsResults measure_physics(const Options& opt, std::size_t shift) {
  using detail::scenario;
  PhysicsResults out;
  auto add = [&](std::string name, double v, double tol) { out.metrics.push_back({std::move(name), v, tol}); };

  // A1, A2: squeezing from vacuum.
  {
    const auto r = detail::run(scenario("fig1", opt, shift), opt);
    const auto& t = r.trajectories.front();
    double p_err = 0.0;
    for (int n = 0; n <= 2; ++n)
      p_err = std::max(p_err, detail::max_abs_diff(t.column("p_" + std::to_string(n)),
                                                   t.column("p_" + std::to_string(n) + "_analytic")));
    double nbar_err = 0.0;
    const auto& nb = t.column("nbar_b");
    const auto& na = t.column("nbar_analytic");
    for (std::size_t k = 0; k < nb.size(); ++k) nbar_err = std::max(nbar_err, std::abs(nb[k] - na[k]) / (1.0 + na[k]));
    add("A1.p_error", p_err, 0.02);
    add("A1.nbar_error", nbar_err, 0.05);
    add("A2.infidelity", 1.0 - t.final("fidelity"), 5e-3);
  }
  {
    auto cfg = scenario("fig2a", opt, shift);
    cfg["times"]["count"] = 2;
    const auto r = detail::run(cfg, opt);
    for (const auto& t : r.trajectories) {
      out.a2_fidelity.push_back(t.final("fidelity"));
      add("A2.infidelity_omega" + experiment::detail::format_value(t.point.front().second), 1.0 - t.final("fidelity"),
          5e-3);
    }
    out.a2_monotone = std::is_sorted(out.a2_fidelity.begin(), out.a2_fidelity.end(), std::less_equal<>());
  }

  // A3: beam splitter from |2,0,2>.
  {
    const auto r = detail::run(scenario("fig3", opt, shift), opt);
    const auto& t = r.trajectories.front();
    double amp = 0.0;
    for (const char* o : {"p_2_2", "p_3_1", "p_1_3", "p_4_0", "p_0_4"})
      amp = std::max(amp, detail::max_abs_diff(t.column(o), t.column(std::string(o) + "_analytic")));
    add("A3.amplitude_error", amp, 0.03);
    add("A3.symmetry_error", detail::max_abs_diff(t.column("p_4_0"), t.column("p_0_4")), 2e-3);
  }

  // A4: Fisher information of the c-mode Fock distribution.
  {
    const auto r = detail::run(scenario("fig4", opt, shift), opt);
    for (const auto& p : r.fisher) add("A4.cfi_n" + std::to_string(p.n), p.cfi, 0.1 * p.qfi + 0.5);
  }

  // A5: conditional swap; thresholds p >= 1 - tolerance.
  {
    const auto r = detail::run(scenario("fig5", opt, shift), opt);
    add("A5.p_up_0_1", detail::by_state(r, "up_a1").final("p_up_0_1"), 0.03);
    add("A5.p_down_1_0", detail::by_state(r, "down_a1").final("p_down_1_0"), 0.01);
    add("A5.p_up_1_1", detail::by_state(r, "up_a1_c1").final("p_up_1_1"), 0.05);
  }

  // A6: spin-entangled N00N state.
  {
    const auto r = detail::run(scenario("fig6", opt, shift), opt);
    add("A6.infidelity", 1.0 - r.trajectories.front().final("fidelity"), 2e-2);
  }
  return out;
}

inline std::vector<CriterionResult> judge_physics(const PhysicsResults& p) {
  using detail::fmt;
  std::vector<CriterionResult> out;
  auto below = [&](const char* name) { return p.metric(name).value <= p.metric(name).tolerance; };
  auto describe = [&](const char* name, const char* label) {
    return std::string(label) + " = " + fmt(p.metric(name).value) + " (tol " + fmt(p.metric(name).tolerance) + ")";
  };
  out.push_back({"A1", below("A1.p_error") && below("A1.nbar_error"),
                 describe("A1.p_error", "max|p_n - analytic|") + "; " +
                     describe("A1.nbar_error", "max|nbar_b - sinh^2 r|/(1+sinh^2 r)")});

  std::string mono = "F(4 ms) at omega/2pi = 14/17/20 kHz:";
  for (double f : p.a2_fidelity) mono += " " + fmt(f);
  out.push_back({"A2", below("A2.infidelity") && p.a2_monotone,
                 describe("A2.infidelity", "1 - F(4 ms)") + "; " + mono +
                     (p.a2_monotone ? " (monotone)" : " (not monotone)")});

  out.push_back({"A3", below("A3.amplitude_error") && below("A3.symmetry_error"),
                 describe("A3.amplitude_error", "max|p - |C|^2|") + "; " +
                     describe("A3.symmetry_error", "max|p_40 - p_04|")});

  bool a4 = true;
  std::string a4_detail = "CFI vs 8n(n+1):";
  for (int n = 0; n <= 5; ++n) {
    const auto& m = p.metric("A4.cfi_n" + std::to_string(n));
    const double q = 8.0 * n * (n + 1);
    a4 = a4 && std::abs(m.value - q) <= m.tolerance;
    a4_detail += " n=" + std::to_string(n) + ":" + fmt(m.value) + "/" + fmt(q);
  }
  out.push_back({"A4", a4, a4_detail});

  auto at_least = [&](const char* name) { return p.metric(name).value >= 1.0 - p.metric(name).tolerance; };
  auto ge = [&](const char* name, const char* label) {
    return std::string(label) + " = " + fmt(p.metric(name).value) + " (>= " + fmt(1.0 - p.metric(name).tolerance) + ")";
  };
  out.push_back({"A5", at_least("A5.p_up_0_1") && at_least("A5.p_down_1_0") && at_least("A5.p_up_1_1"),
                 ge("A5.p_up_0_1", "p_up01(t_g)") + "; " + ge("A5.p_down_1_0", "p_down10(t_g)") + "; " +
                     ge("A5.p_up_1_1", "p_up11(t_g)")});

  out.push_back({"A6", below("A6.infidelity"), describe("A6.infidelity", "1 - F_G(t_g)")});
  return out;
}

/// Every A1-A6 metric moves by less than half its tolerance when n_max grows by 3.
inline CriterionResult judge_convergence(const PhysicsResults& base, const PhysicsResults& raised) {
  CriterionResult r{"A9", true, ""};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& m : base.metrics) {
    const double shift = std::abs(raised.metric(m.name).value - m.value);
    const double ratio = shift / (0.5 * m.tolerance);
    if (ratio > worst) worst = ratio, worst_name = m.name;
    if (shift >= 0.5 * m.tolerance) r.pass = false;
  }
  r.detail = std::to_string(base.metrics.size()) + " metrics; largest shift/(tol/2) = " + detail::fmt(worst) +
             (worst_name.empty() ? "" : " (" + worst_name + ")");
  return r;
}

/// Oracle equivalences: beam-splitter amplitudes and squeezed states against
/// dense exponentials, Krylov against dense propagation.
inline CriterionResult check_oracles(double tol) {
  double bs_err = 0.0;
  for (int total = 0; total <= 6; ++total) {
    const auto space = make_space({{Mode::a, static_cast<std::size_t>(total) + 1}, {Mode::c, static_cast<std::size_t>(total) + 1}});
    const Operator y = ladder(space, Mode::a).adjoint() * ladder(space, Mode::c);
    const Operator h = y + y.adjoint();
    for (int k = 0; k < 16; ++k) {
      const double x = k * std::numbers::pi / 8.0 + 0.1;
      const DenseMatrix u = propagator_dense(h, x);
      for (int n1 = 0; n1 <= total; ++n1)
        for (int N1 = 0; N1 <= total; ++N1) {
          const std::size_t in[2] = {static_cast<std::size_t>(n1), static_cast<std::size_t>(total - n1)};
          const std::size_t outi[2] = {static_cast<std::size_t>(N1), static_cast<std::size_t>(total - N1)};
          const cplx expected = u(static_cast<Eigen::Index>(space.index(outi)), static_cast<Eigen::Index>(space.index(in)));
          const cplx got = std::polar(1.0, std::numbers::pi / 2.0 * (n1 - N1)) * bs_coefficient(n1, total - n1, N1, total - N1, x);
          bs_err = std::max(bs_err, std::abs(expected - got));
        }
    }
  }

  // Starting from vacuum, -kappa(e^{i phi} b^dagger c^dagger + h.c.) stays in span{|n,n>},
  // where it is tridiagonal with elements -kappa e^{i phi} (n+1).
  double tmss_err = 0.0;
  // edge amplitude tanh(1)^160 ~ 1e-19, far below the tolerance
  const std::size_t twin_max = 160;
  const auto twin = make_space({{Mode::b, twin_max + 1}});
  for (double r : {0.1, 0.4, 0.7, 1.0})
    for (double theta : {0.0, 1.1, -2.5}) {
      const double phi = theta - std::numbers::pi / 2.0;
      std::vector<Eigen::Triplet<cplx>> trips;
      for (std::size_t n = 0; n < twin_max; ++n) {
        const cplx v = -std::polar(static_cast<double>(n + 1), phi);
        trips.emplace_back(static_cast<int>(n + 1), static_cast<int>(n), v);
        trips.emplace_back(static_cast<int>(n), static_cast<int>(n + 1), std::conj(v));
      }
      SparseMatrix m(static_cast<Eigen::Index>(twin.dim()), static_cast<Eigen::Index>(twin.dim()));
      m.setFromTriplets(trips.begin(), trips.end());
      const Vector evolved = propagator_dense(Operator(twin, m), r).col(0);
      const auto state = tmss_state({r, theta}, twin_max);
      for (std::size_t n = 0; n <= twin_max; ++n) {
        const std::size_t d[2] = {n, n};
        tmss_err = std::max(tmss_err, std::abs(state.state.amplitude(d) - evolved(static_cast<Eigen::Index>(n))));
      }
    }

  std::mt19937_64 rng(424242);
  std::uniform_int_distribution<std::size_t> dim(2, 200);
  std::uniform_real_distribution<double> time(0.05, 2.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double krylov_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = dim(rng);
    DenseMatrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = cplx(g(rng), g(rng));
    const DenseMatrix hd = (a + a.adjoint()) / 2.0;
    const auto space = make_space({{Mode::a, n}});
    const Operator h(space, hd.sparseView());
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(g(rng), g(rng));
    const StateVector psi0(space, v / v.norm());
    const double t = time(rng);
    const auto traj = evolve(h, psi0, std::vector<double>{t}, std::min(tol, 1e-10));
    krylov_err = std::max(krylov_err, (traj.states.back().amplitudes() - propagator_dense(h, t) * psi0.amplitudes()).norm());
  }

  const bool pass = bs_err <= 1e-8 && tmss_err <= 1e-8 && krylov_err <= 1e-9;
  return {"A7", pass,
          "bs vs dense = " + detail::fmt(bs_err) + " (tol 1e-08); tmss vs dense = " + detail::fmt(tmss_err) +
              " (tol 1e-08); Krylov vs dense = " + detail::fmt(krylov_err) + " (tol 1e-09)"};
}

/// Closed-form Fisher information values.
inline CriterionResult check_metrology() {
  const std::size_t n_max = 100;
  double cfi_err = 0.0;
  ProbabilityModel twin;
  twin.evaluate = [&](double r) {
    const auto s = tmss_state({r, 0.0}, n_max, 1e-12);
    std::vector<double> p(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) {
      const std::size_t d[2] = {n, n};
      p[n] = std::norm(s.state.amplitude(d));
    }
    return p;
  };
  for (int k = 1; k <= 12; ++k) cfi_err = std::max(cfi_err, std::abs(cfi(twin, 0.1 * k).value - 4.0));

  double qfi_ratio = 0.0;
  for (int k = 1; k <= 12; ++k) {
    const double r = 0.1 * k;
    const double q = qfi_pure_numeric([&](double th) { return tmss_state({r, th}, n_max, 1e-12).state; }, 0.3);
    const double expected = closed_form_qfi(ClosedFormQfi::tmss_theta, r);
    qfi_ratio = std::max(qfi_ratio, std::abs(q - expected) / (1.0 + expected));
  }

  double gen_err = 0.0;
  for (int n = 0; n <= 10; ++n) {
    const auto psi = bs_final_state(n, n, {0.0, 0.0}, 0.0, static_cast<std::size_t>(2 * n + 1));
    const Operator y = ladder(psi.space(), Mode::a).adjoint() * ladder(psi.space(), Mode::c);
    const double expected = closed_form_qfi(ClosedFormQfi::bs_epsilon, n);
    gen_err = std::max(gen_err, std::abs(qfi_generator(y + y.adjoint(), psi) - expected) / (1.0 + expected));
  }

  const bool pass = cfi_err <= 1e-4 && qfi_ratio <= 1e-3 && gen_err <= 1e-12;
  return {"A8", pass,
          "max|CFI_r - 4| = " + detail::fmt(cfi_err) + " (tol 1e-04); max|QFI_theta - 4n(n+1)|/(1+F) = " +
              detail::fmt(qfi_ratio) + " (tol 1e-03); generator 8n(n+1) rel err = " + detail::fmt(gen_err) +
              " (tol 1e-12)"};
}

/// Runs A1-A9 in order, reporting each result as soon as it is known.
inline std::vector<CriterionResult> run_all(const Options& opt,
                                            const std::function<void(const CriterionResult&)>& report = {}) {
  std::vector<CriterionResult> results;
  auto emit = [&](CriterionResult r) {
    if (report) report(r);
    results.push_back(std::move(r));
  };
  const PhysicsResults base = measure_physics(opt, 0);
  for (auto& r : judge_physics(base)) emit(std::move(r));
  emit(check_oracles(opt.tol));
  emit(check_metrology());
  emit(judge_convergence(base, measure_physics(opt, 3)));
  return results;
}

inline std::string format_line(const CriterionResult& r) {
  return r.id + (r.pass ? " PASS " : " FAIL ") + r.detail;
}

}  // namespace phonon::acceptance
