#pragma once

// Experiment runner: JSON configs (frequencies as nu/2pi in kHz), the built-in
// figure scenarios, parallel parameter sweeps, and deterministic CSV/JSON output.

#include "phonon/analytic.hpp"
#include "phonon/fock.hpp"
#include "phonon/hamiltonians.hpp"
#include "phonon/metrology.hpp"
#include "phonon/physconst.hpp"
#include "phonon/propagate.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace phonon::experiment {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Configuration

struct StateSpec {
  std::map<Mode, std::size_t> occupations;
  /// "up", "down" or "plus" for (|down> + |up>)/sqrt(2).
  std::optional<std::string> spin;

  std::string label() const {
    std::string s = spin.value_or("");
    for (const auto& [m, n] : occupations) {
      if (n == 0) continue;
      if (!s.empty()) s += "_";
      s += std::string(mode_name(m)) + std::to_string(n);
    }
    return s.empty() ? "vacuum" : s;
  }

  StateVector build(const HilbertSpace& space) const {
    if (!spin) return fock_state(space, occupations);
    if (*spin == "plus")
      return std::sqrt(0.5) * (fock_state(space, occupations, Spin::down) + fock_state(space, occupations, Spin::up));
    return fock_state(space, occupations, parse_spin(*spin));
  }
};

struct TimeGrid {
  double start = 0.0;
  double stop = 0.0;
  bool stop_at_gate_time = false;  ///< stop = stop_factor * pi / (2 eps_b)
  double stop_factor = 1.0;
  std::size_t count = 2;

  std::vector<double> points(const HamiltonianSpec& spec) const {
    const double end = stop_at_gate_time ? stop_factor * gate_time(effective_rate(spec)) : stop;
    if (!(end > start)) throw ConfigError("time grid stop must exceed start");
    std::vector<double> t(count);
    for (std::size_t k = 0; k < count; ++k)
      t[k] = start + (end - start) * static_cast<double>(k) / static_cast<double>(count - 1);
    t.back() = end;
    return t;
  }
};

struct OutputSpec {
  std::string type;  ///< probability, mean_number, norm_error, tmss_prob, tmss_mean, bs_prob, tmss_fidelity, noon_fidelity
  std::string name;
  std::map<Mode, std::size_t> occupations;  // probability
  std::optional<Spin> spin;                 // probability
  Mode mode = Mode::b;                      // mean_number
  int n = 0;                                // tmss_prob, noon_fidelity
  int n1 = 0, n2 = 0, N1 = 0, N2 = 0;       // bs_prob
};

struct SweepAxis {
  std::string parameter;
  std::vector<double> values;
};

/// CFI of a single-mode Fock measurement with respect to lambda = eps t_f,
/// varied through the drive amplitude.
struct FisherSpec {
  Mode measure = Mode::c;
  std::vector<Mode> occupied{Mode::a, Mode::c};  ///< modes prepared in |n>
  std::vector<int> n_values;
  double t_f = 1.0;
  double step = 1e-4;
  bool richardson = false;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string scenario = "custom";
  HamiltonianSpec hamiltonian;
  std::vector<StateSpec> initial_states;
  TimeGrid times;
  std::vector<OutputSpec> outputs;
  std::vector<SweepAxis> sweep;
  std::optional<FisherSpec> fisher;
  double tol = 1e-9;
  /// Largest squeezed-state tail dropped by the truncation of fidelity targets.
  double max_tail = 1e-4;
};

namespace detail {

inline void require_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
}

inline double number_at(const json& j, const std::string& key, std::string_view where) {
  if (!j.contains(key)) throw ConfigError(std::string(where) + " is missing '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string(where) + "." + key + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string(where) + "." + key + " must be finite");
  return x;
}

inline double number_or(const json& j, const std::string& key, double fallback, std::string_view where) {
  return j.contains(key) ? number_at(j, key, where) : fallback;
}

inline std::size_t count_at(const json& j, const std::string& key, std::string_view where) {
  const double x = number_at(j, key, where);
  if (x < 0 || x != std::floor(x)) throw ConfigError(std::string(where) + "." + key + " must be a non-negative integer");
  return static_cast<std::size_t>(x);
}

inline std::size_t count_at(const json& arr, std::size_t i, std::string_view where) {
  const auto& v = arr.at(i);
  if (!v.is_number() || v.get<double>() < 0 || v.get<double>() != std::floor(v.get<double>()))
    throw ConfigError(std::string(where) + " entries must be non-negative integers");
  return v.get<std::size_t>();
}

inline bool bool_or(const json& j, const std::string& key, bool fallback, std::string_view where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(std::string(where) + "." + key + " must be true or false");
  return j.at(key).get<bool>();
}

inline std::string string_at(const json& j, const std::string& key, std::string_view where) {
  if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError(std::string(where) + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

inline Mode mode_from(const std::string& s, std::string_view where) {
  try {
    return parse_mode(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("unknown mode '" + s + "' in " + std::string(where));
  }
}

inline std::map<Mode, std::size_t> occupations_from(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must map mode names to phonon numbers");
  std::map<Mode, std::size_t> out;
  for (const auto& [key, value] : j.items()) {
    const Mode m = mode_from(key, where);
    if (m == Mode::spin) throw ConfigError("spin is set with the 'spin' key, not as an occupation");
    out[m] = count_at(j, key, where);
  }
  return out;
}

inline Truncation truncation_from(const json& j) {
  if (j.is_number()) {
    const std::size_t n = count_at(json{{"n_max", j}}, "n_max", "hamiltonian");
    return Truncation::uniform(n);
  }
  require_keys(j, "hamiltonian.n_max", {"a", "b", "c"});
  Truncation t;
  t.a = j.contains("a") ? count_at(j, "a", "hamiltonian.n_max") : t.a;
  t.b = j.contains("b") ? count_at(j, "b", "hamiltonian.n_max") : t.b;
  t.c = j.contains("c") ? count_at(j, "c", "hamiltonian.n_max") : t.c;
  return t;
}

inline HamiltonianSpec hamiltonian_from(const json& j) {
  require_keys(j, "hamiltonian",
               {"kind", "xi_khz", "omega_khz", "drive_khz", "g_b_khz", "phi", "eta_b", "include_residual",
                "include_ac_stark", "n_max"});
  HamiltonianSpec s;
  try {
    s.kind = parse_kind(string_at(j, "kind", "hamiltonian"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto khz = [&](const char* key) {
    const double v = number_or(j, key, 0.0, "hamiltonian");
    if (v < 0.0) throw ConfigError(std::string("hamiltonian.") + key + " must be non-negative");
    return khz_to_angular(v);
  };
  s.xi = khz("xi_khz");
  s.omega = khz("omega_khz");
  s.drive = khz("drive_khz");
  s.g_b = khz("g_b_khz");
  s.phi = number_or(j, "phi", 0.0, "hamiltonian");
  s.eta_b = number_or(j, "eta_b", 0.0, "hamiltonian");
  s.include_residual = bool_or(j, "include_residual", false, "hamiltonian");
  s.include_ac_stark = bool_or(j, "include_ac_stark", false, "hamiltonian");
  if (j.contains("n_max")) s.n_max = truncation_from(j.at("n_max"));
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline StateSpec state_from(const json& j) {
  require_keys(j, "initial_state", {"occupations", "spin"});
  StateSpec s;
  if (j.contains("occupations")) s.occupations = occupations_from(j.at("occupations"), "initial_state.occupations");
  if (j.contains("spin")) {
    const std::string v = string_at(j, "spin", "initial_state");
    if (v != "up" && v != "down" && v != "plus") throw ConfigError("initial_state.spin must be up, down or plus");
    s.spin = v;
  }
  return s;
}

inline TimeGrid times_from(const json& j) {
  require_keys(j, "times", {"start", "stop", "stop_factor", "count"});
  TimeGrid g;
  g.start = number_or(j, "start", 0.0, "times");
  if (g.start < 0.0) throw ConfigError("times.start must be non-negative");
  if (!j.contains("stop")) throw ConfigError("times is missing 'stop'");
  if (j.at("stop").is_string()) {
    if (j.at("stop").get<std::string>() != "t_g") throw ConfigError("times.stop must be a number or \"t_g\"");
    g.stop_at_gate_time = true;
    g.stop_factor = number_or(j, "stop_factor", 1.0, "times");
    if (!(g.stop_factor > 0.0)) throw ConfigError("times.stop_factor must be positive");
  } else {
    g.stop = number_at(j, "stop", "times");
    if (!(g.stop > g.start)) throw ConfigError("times.stop must exceed times.start");
  }
  g.count = count_at(j, "count", "times");
  if (g.count < 2) throw ConfigError("times.count must be at least 2");
  return g;
}

inline OutputSpec output_from(const json& j) {
  if (!j.is_object()) throw ConfigError("each output must be an object");
  OutputSpec o;
  o.type = string_at(j, "type", "output");
  o.name = string_at(j, "name", "output");
  if (o.name.empty() || o.name.find_first_of(",\"\n") != std::string::npos)
    throw ConfigError("output name '" + o.name + "' is not a valid CSV column");
  const std::string where = "output '" + o.name + "'";
  if (o.type == "probability") {
    require_keys(j, where, {"type", "name", "occupations", "spin"});
    o.occupations = occupations_from(j.contains("occupations") ? j.at("occupations") : json::object(), where);
    if (j.contains("spin")) {
      try {
        o.spin = parse_spin(string_at(j, "spin", where));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
    if (o.occupations.empty() && !o.spin) throw ConfigError(where + " selects no subsystem");
  } else if (o.type == "mean_number") {
    require_keys(j, where, {"type", "name", "mode"});
    o.mode = mode_from(string_at(j, "mode", where), where);
    if (o.mode == Mode::spin) throw ConfigError(where + ": spin has no phonon number");
  } else if (o.type == "tmss_prob" || o.type == "noon_fidelity") {
    require_keys(j, where, {"type", "name", "n"});
    o.n = static_cast<int>(count_at(j, "n", where));
  } else if (o.type == "bs_prob") {
    require_keys(j, where, {"type", "name", "n1", "n2", "N1", "N2"});
    o.n1 = static_cast<int>(count_at(j, "n1", where));
    o.n2 = static_cast<int>(count_at(j, "n2", where));
    o.N1 = static_cast<int>(count_at(j, "N1", where));
    o.N2 = static_cast<int>(count_at(j, "N2", where));
  } else if (o.type == "tmss_mean" || o.type == "tmss_fidelity" || o.type == "norm_error") {
    require_keys(j, where, {"type", "name"});
  } else {
    throw ConfigError("unknown output type '" + o.type + "'");
  }
  return o;
}

inline const std::set<std::string>& sweep_parameters() {
  static const std::set<std::string> names{"xi_khz", "omega_khz", "drive_khz", "g_b_khz", "phi", "eta_b", "n_max"};
  return names;
}

inline FisherSpec fisher_from(const json& j) {
  require_keys(j, "fisher", {"measure", "occupied", "n_values", "t_f", "step", "richardson"});
  FisherSpec f;
  f.measure = mode_from(string_at(j, "measure", "fisher"), "fisher");
  if (j.contains("occupied")) {
    if (!j.at("occupied").is_array()) throw ConfigError("fisher.occupied must be a list of modes");
    f.occupied.clear();
    for (const auto& m : j.at("occupied")) {
      if (!m.is_string()) throw ConfigError("fisher.occupied must be a list of modes");
      f.occupied.push_back(mode_from(m.get<std::string>(), "fisher.occupied"));
    }
  }
  if (!j.contains("n_values") || !j.at("n_values").is_array() || j.at("n_values").empty())
    throw ConfigError("fisher.n_values must be a nonempty list");
  for (std::size_t i = 0; i < j.at("n_values").size(); ++i)
    f.n_values.push_back(static_cast<int>(count_at(j.at("n_values"), i, "fisher.n_values")));
  f.t_f = number_at(j, "t_f", "fisher");
  if (!(f.t_f > 0.0)) throw ConfigError("fisher.t_f must be positive");
  f.step = number_or(j, "step", f.step, "fisher");
  if (!(f.step > 0.0)) throw ConfigError("fisher.step must be positive");
  f.richardson = bool_or(j, "richardson", false, "fisher");
  return f;
}

}  // namespace detail

/// Validates and converts a JSON config. Throws ConfigError.
inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  require_keys(j, "config",
               {"schema_version", "scenario", "hamiltonian", "initial_state", "times", "outputs", "sweep", "fisher",
                "tol", "max_tail"});
  ExperimentConfig c;
  c.schema_version = static_cast<int>(count_at(j, "schema_version", "config"));
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  if (j.contains("scenario")) c.scenario = string_at(j, "scenario", "config");
  if (c.scenario.empty() || c.scenario.find_first_of("/\\") != std::string::npos)
    throw ConfigError("scenario name must be a plain file stem");
  if (!j.contains("hamiltonian")) throw ConfigError("config is missing 'hamiltonian'");
  c.hamiltonian = hamiltonian_from(j.at("hamiltonian"));
  c.tol = number_or(j, "tol", c.tol, "config");
  if (!(c.tol > 0.0 && c.tol <= 1e-4)) throw ConfigError("tol must lie in (0, 1e-4]");
  c.max_tail = number_or(j, "max_tail", c.max_tail, "config");
  if (!(c.max_tail > 0.0 && c.max_tail < 1.0)) throw ConfigError("max_tail must lie in (0, 1)");

  if (j.contains("sweep")) {
    if (!j.at("sweep").is_array()) throw ConfigError("sweep must be a list of {parameter, values}");
    std::set<std::string> seen;
    for (const auto& axis : j.at("sweep")) {
      require_keys(axis, "sweep", {"parameter", "values"});
      SweepAxis a;
      a.parameter = string_at(axis, "parameter", "sweep");
      if (!sweep_parameters().contains(a.parameter)) throw ConfigError("cannot sweep '" + a.parameter + "'");
      if (!seen.insert(a.parameter).second) throw ConfigError("parameter '" + a.parameter + "' swept twice");
      if (!axis.contains("values") || !axis.at("values").is_array() || axis.at("values").empty())
        throw ConfigError("sweep values must be a nonempty list");
      for (const auto& v : axis.at("values")) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError("sweep values must be finite numbers");
        a.values.push_back(v.get<double>());
      }
      c.sweep.push_back(std::move(a));
    }
  }

  if (j.contains("fisher")) {
    c.fisher = fisher_from(j.at("fisher"));
    const auto k = c.hamiltonian.kind;
    if (k != HamiltonianKind::driven_b && k != HamiltonianKind::effective_bs)
      throw ConfigError("fisher runs need a driven_b or effective_bs Hamiltonian");
    if (c.hamiltonian.xi == 0.0 || c.hamiltonian.omega == 0.0)
      throw ConfigError("fisher runs need nonzero xi and omega");
    if (j.contains("times") || j.contains("outputs") || j.contains("initial_state"))
      throw ConfigError("fisher runs take no times, outputs or initial_state");
    return c;
  }

  if (!j.contains("initial_state")) throw ConfigError("config is missing 'initial_state'");
  const auto& init = j.at("initial_state");
  if (init.is_array()) {
    if (init.empty()) throw ConfigError("initial_state list is empty");
    for (const auto& s : init) c.initial_states.push_back(state_from(s));
  } else {
    c.initial_states.push_back(state_from(init));
  }
  if (!j.contains("times")) throw ConfigError("config is missing 'times'");
  c.times = times_from(j.at("times"));
  if (!j.contains("outputs") || !j.at("outputs").is_array() || j.at("outputs").empty())
    throw ConfigError("outputs must be a nonempty list");
  std::set<std::string> names{"t"};
  for (const auto& o : j.at("outputs")) {
    c.outputs.push_back(output_from(o));
    if (!names.insert(c.outputs.back().name).second)
      throw ConfigError("duplicate output name '" + c.outputs.back().name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"fig1", "fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6", "params"};
  return names;
}

/// Default config of a figure scenario.
inline json builtin_config(std::string_view name) {
  static const std::map<std::string, std::string, std::less<>> configs{
      {"fig1", R"({
  "schema_version": 1, "scenario": "fig1",
  "hamiltonian": {"kind": "driven_a", "xi_khz": 0.2, "omega_khz": 20, "drive_khz": 3.5, "phi": 0, "n_max": 20},
  "initial_state": {"occupations": {}},
  "times": {"start": 0, "stop": 4, "count": 81},
  "outputs": [
    {"type": "probability", "name": "p_0", "occupations": {"b": 0, "c": 0}},
    {"type": "probability", "name": "p_1", "occupations": {"b": 1, "c": 1}},
    {"type": "probability", "name": "p_2", "occupations": {"b": 2, "c": 2}},
    {"type": "mean_number", "name": "nbar_b", "mode": "b"},
    {"type": "tmss_prob", "name": "p_0_analytic", "n": 0},
    {"type": "tmss_prob", "name": "p_1_analytic", "n": 1},
    {"type": "tmss_prob", "name": "p_2_analytic", "n": 2},
    {"type": "tmss_mean", "name": "nbar_analytic"},
    {"type": "tmss_fidelity", "name": "fidelity"}
  ]
})"},
      {"fig2a", R"({
  "schema_version": 1, "scenario": "fig2a",
  "hamiltonian": {"kind": "driven_a", "xi_khz": 0.2, "omega_khz": 20, "drive_khz": 3.5,
                  "phi": 0.39269908169872414, "n_max": {"a": 10, "b": 30, "c": 30}},
  "initial_state": {"occupations": {}},
  "times": {"start": 0, "stop": 4, "count": 81},
  "outputs": [{"type": "tmss_fidelity", "name": "fidelity"}, {"type": "mean_number", "name": "nbar_b", "mode": "b"}],
  "sweep": [{"parameter": "omega_khz", "values": [14, 17, 20]}]
})"},
      {"fig2b", R"({
  "schema_version": 1, "scenario": "fig2b",
  "hamiltonian": {"kind": "driven_a", "xi_khz": 0.2, "omega_khz": 20, "drive_khz": 3.5,
                  "phi": 0.39269908169872414, "n_max": {"a": 10, "b": 30, "c": 30}},
  "initial_state": {"occupations": {}},
  "times": {"start": 0, "stop": 4, "count": 81},
  "outputs": [{"type": "tmss_fidelity", "name": "fidelity"}, {"type": "mean_number", "name": "nbar_b", "mode": "b"}],
  "sweep": [{"parameter": "drive_khz", "values": [2, 3.5, 5]}]
})"},
      {"fig3", R"({
  "schema_version": 1, "scenario": "fig3",
  "hamiltonian": {"kind": "driven_b", "xi_khz": 0.2, "omega_khz": 17, "drive_khz": 6.5, "phi": 0, "n_max": 20},
  "initial_state": {"occupations": {"a": 2, "c": 2}},
  "times": {"start": 0, "stop": 7, "count": 141},
  "outputs": [
    {"type": "probability", "name": "p_2_2", "occupations": {"a": 2, "c": 2}},
    {"type": "probability", "name": "p_3_1", "occupations": {"a": 3, "c": 1}},
    {"type": "probability", "name": "p_1_3", "occupations": {"a": 1, "c": 3}},
    {"type": "probability", "name": "p_4_0", "occupations": {"a": 4, "c": 0}},
    {"type": "probability", "name": "p_0_4", "occupations": {"a": 0, "c": 4}},
    {"type": "bs_prob", "name": "p_2_2_analytic", "n1": 2, "n2": 2, "N1": 2, "N2": 2},
    {"type": "bs_prob", "name": "p_3_1_analytic", "n1": 2, "n2": 2, "N1": 3, "N2": 1},
    {"type": "bs_prob", "name": "p_1_3_analytic", "n1": 2, "n2": 2, "N1": 1, "N2": 3},
    {"type": "bs_prob", "name": "p_4_0_analytic", "n1": 2, "n2": 2, "N1": 4, "N2": 0},
    {"type": "bs_prob", "name": "p_0_4_analytic", "n1": 2, "n2": 2, "N1": 0, "N2": 4}
  ]
})"},
      {"fig4", R"({
  "schema_version": 1, "scenario": "fig4",
  "hamiltonian": {"kind": "driven_b", "xi_khz": 0.2, "omega_khz": 20, "drive_khz": 4.5, "phi": 0,
                  "n_max": {"a": 12, "b": 8, "c": 12}},
  "fisher": {"measure": "c", "occupied": ["a", "c"], "n_values": [0, 1, 2, 3, 4, 5], "t_f": 1, "step": 1e-4}
})"},
      {"fig5", R"({
  "schema_version": 1, "scenario": "fig5",
  "hamiltonian": {"kind": "spin_conditional", "xi_khz": 0.2, "omega_khz": 18, "g_b_khz": 5.5, "eta_b": 0.06,
                  "n_max": 10},
  "initial_state": [
    {"spin": "up", "occupations": {"a": 1}},
    {"spin": "up", "occupations": {"a": 1, "c": 1}},
    {"spin": "down", "occupations": {"a": 1}}
  ],
  "times": {"start": 0, "stop": "t_g", "count": 101},
  "outputs": [
    {"type": "probability", "name": "p_up_1_0", "spin": "up", "occupations": {"a": 1, "c": 0}},
    {"type": "probability", "name": "p_up_0_1", "spin": "up", "occupations": {"a": 0, "c": 1}},
    {"type": "probability", "name": "p_up_1_1", "spin": "up", "occupations": {"a": 1, "c": 1}},
    {"type": "probability", "name": "p_down_1_0", "spin": "down", "occupations": {"a": 1, "c": 0}}
  ]
})"},
      {"fig6", R"({
  "schema_version": 1, "scenario": "fig6",
  "hamiltonian": {"kind": "spin_conditional", "xi_khz": 0.3, "omega_khz": 15.8, "g_b_khz": 6.3, "eta_b": 0.05,
                  "include_ac_stark": true, "n_max": 10},
  "initial_state": {"spin": "plus", "occupations": {"a": 2}},
  "times": {"start": 0, "stop": "t_g", "count": 101},
  "outputs": [{"type": "noon_fidelity", "name": "fidelity", "n": 2}]
})"},
  };
  const auto it = configs.find(name);
  if (it == configs.end()) throw ConfigError("unknown scenario '" + std::string(name) + "'");
  return json::parse(it->second);
}

/// z0, xi and eta_b for a trap.
inline json params_json(const physconst::TrapConfig& cfg = {}) {
  const double xi = physconst::trilinear_coupling(cfg);
  return json{{"ion_mass_kg", cfg.ion_mass},
              {"omega_z_over_2pi_hz", cfg.omega_z / (2.0 * std::numbers::pi)},
              {"z0_m", physconst::ion_spacing(cfg)},
              {"xi_rad_per_s", xi},
              {"xi_over_2pi_khz", xi / (2.0 * std::numbers::pi) / 1e3},
              {"eta_b", physconst::lamb_dicke(cfg)}};
}

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::size_t> nmax;  ///< uniform truncation override
  std::optional<double> tol;
};

struct TrajectoryResult {
  std::string stem;
  std::vector<std::pair<std::string, double>> point;  ///< sweep coordinates
  std::string state_label;
  HamiltonianSpec spec;
  std::vector<double> times;
  std::vector<Trajectory::Record> columns;
  double max_norm_error = 0.0;
  std::size_t substeps = 0;
  std::map<std::string, double> top_level;  ///< max over time of the top-level population per mode
  double max_tail = 0.0;                    ///< largest dropped tail of a squeezed-state target
  double gate_time = 0.0;                   ///< 0 unless the Hamiltonian has a spin

  const std::vector<double>& column(std::string_view name) const {
    for (const auto& c : columns)
      if (c.name == name) return c.values;
    throw std::out_of_range("no column '" + std::string(name) + "'");
  }
  double final(std::string_view name) const { return column(name).back(); }
};

struct FisherPoint {
  int n = 0;
  double lambda = 0.0;
  double cfi = 0.0;
  double qfi = 0.0;
  double excluded_mass = 0.0;
  double deficit = 0.0;
  double max_norm_error = 0.0;
  double top_level = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrajectoryResult> trajectories;
  std::vector<FisherPoint> fisher;
};

namespace detail {

inline void apply_parameter(HamiltonianSpec& s, const std::string& name, double v) {
  if (name == "n_max") {
    if (v < 1 || v != std::floor(v)) throw ConfigError("swept n_max must be a positive integer");
    s.n_max = Truncation::uniform(static_cast<std::size_t>(v));
    return;
  }
  if (name == "phi") {
    s.phi = v;
    return;
  }
  if (name == "eta_b") {
    s.eta_b = v;
    return;
  }
  if (v < 0.0) throw ConfigError("swept " + name + " must be non-negative");
  if (name == "xi_khz") s.xi = khz_to_angular(v);
  else if (name == "omega_khz") s.omega = khz_to_angular(v);
  else if (name == "drive_khz") s.drive = khz_to_angular(v);
  else if (name == "g_b_khz") s.g_b = khz_to_angular(v);
  else throw ConfigError("cannot sweep '" + name + "'");
}

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Runs fn(0..n-1) on up to `jobs` threads; the first exception by index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Sum of |psi_i|^2 over basis states whose listed digits match.
inline double marginal_probability(const StateVector& psi, const std::map<Mode, std::size_t>& occ,
                                   std::optional<Spin> spin) {
  const auto& space = psi.space();
  std::vector<std::array<std::size_t, 3>> checks;  // stride, dim, digit
  for (const auto& [m, n] : occ) {
    if (n >= space.dim(m)) return 0.0;
    checks.push_back({space.stride(m), space.dim(m), n});
  }
  if (spin) checks.push_back({space.stride(Mode::spin), 2, static_cast<std::size_t>(*spin)});
  double p = 0.0;
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    bool match = true;
    for (const auto& [stride, d, digit] : checks)
      if ((i / stride) % d != digit) {
        match = false;
        break;
      }
    if (match) p += std::norm(psi.amplitudes()(static_cast<Eigen::Index>(i)));
  }
  return p;
}

inline void check_outputs(const std::vector<OutputSpec>& outputs, const HilbertSpace& space,
                          const HamiltonianSpec& spec) {
  for (const auto& o : outputs) {
    if (o.type == "probability") {
      for (const auto& [m, n] : o.occupations)
        if (!space.contains(m)) throw ConfigError("output '" + o.name + "' refers to a missing mode");
      if (o.spin && !space.contains(Mode::spin)) throw ConfigError("output '" + o.name + "' needs a spin");
    } else if (o.type == "tmss_fidelity") {
      if (space.contains(Mode::spin)) throw ConfigError("tmss_fidelity needs a spinless Hamiltonian");
    } else if (o.type == "noon_fidelity") {
      if (!space.contains(Mode::spin)) throw ConfigError("noon_fidelity needs a spin-conditional Hamiltonian");
      if (space.dim(Mode::a) != space.dim(Mode::c)) throw ConfigError("noon_fidelity needs equal a and c truncations");
      if (static_cast<std::size_t>(o.n) > space.n_max(Mode::a)) throw ConfigError("noon_fidelity n exceeds truncation");
    } else if (o.type == "tmss_prob" || o.type == "tmss_mean" || o.type == "bs_prob") {
      if (spec.omega == 0.0) throw ConfigError("analytic output '" + o.name + "' needs a nonzero detuning");
    }
  }
}

}  // namespace detail

/// Propagates one initial state and evaluates the configured outputs on the time grid.
inline TrajectoryResult simulate(const HamiltonianSpec& spec, const StateSpec& init, const ExperimentConfig& cfg,
                                 double tol) {
  TrajectoryResult res;
  res.spec = spec;
  res.state_label = init.label();
  const Operator h = build_hamiltonian(spec);
  const HilbertSpace& space = h.space();
  detail::check_outputs(cfg.outputs, space, spec);
  const StateVector psi0 = init.build(space);
  res.times = cfg.times.points(spec);
  if (space.contains(Mode::spin)) res.gate_time = gate_time(effective_rate(spec));

  const double rate = std::any_of(cfg.outputs.begin(), cfg.outputs.end(),
                                  [](const OutputSpec& o) {
                                    return o.type == "tmss_prob" || o.type == "tmss_mean" || o.type == "bs_prob" ||
                                           o.type == "tmss_fidelity";
                                  })
                          ? effective_rate(spec)
                          : 0.0;
  std::map<Mode, Operator> numbers;
  for (const auto& o : cfg.outputs)
    if (o.type == "mean_number" && !numbers.contains(o.mode)) numbers.emplace(o.mode, number(space, o.mode));
  std::optional<StateVector> noon;
  for (const auto& o : cfg.outputs)
    if (o.type == "noon_fidelity") noon = noon_state(static_cast<std::size_t>(o.n), space.n_max(Mode::a));
  const std::vector<Mode> bc{Mode::b, Mode::c};
  const HilbertSpace bc_space = space.contains(Mode::spin) ? HilbertSpace{} : space.restrict_to(bc);

  const std::size_t nt = res.times.size();
  for (const auto& o : cfg.outputs) res.columns.push_back({o.name, std::vector<double>(nt)});
  std::vector<Mode> bosons;
  for (Mode m : space.labels())
    if (m != Mode::spin) bosons.push_back(m);

  EvolveOptions opts;
  opts.store_states = false;
  opts.observer = [&](std::size_t k, double t, const StateVector& psi) {
    for (Mode m : bosons) {
      double& top = res.top_level[std::string(mode_name(m))];
      top = std::max(top, top_level_population(psi, m));
    }
    for (std::size_t j = 0; j < cfg.outputs.size(); ++j) {
      const auto& o = cfg.outputs[j];
      double v = 0.0;
      if (o.type == "probability") v = detail::marginal_probability(psi, o.occupations, o.spin);
      else if (o.type == "mean_number") v = expectation(psi, numbers.at(o.mode)).real();
      else if (o.type == "norm_error") v = std::abs(psi.norm() - 1.0);
      else if (o.type == "tmss_prob") v = tmss_prob(o.n, rate * t);
      else if (o.type == "tmss_mean") v = std::pow(std::sinh(rate * t), 2);
      else if (o.type == "bs_prob") v = std::pow(bs_coefficient(o.n1, o.n2, o.N1, o.N2, rate * t), 2);
      else if (o.type == "tmss_fidelity") {
        const auto target = tmss_state({rate * t, spec.phi + std::numbers::pi / 2.0}, bc_space, cfg.max_tail);
        res.max_tail = std::max(res.max_tail, target.tail_mass);
        v = reduced_fidelity(psi, target.state);
      } else if (o.type == "noon_fidelity") v = reduced_fidelity(psi, *noon);
      res.columns[j].values[k] = v;
    }
  };
  const Trajectory traj = evolve(h, psi0, res.times, tol, opts);
  res.max_norm_error = traj.max_norm_error;
  res.substeps = traj.substeps;
  return res;
}

/// CFI of the Fock distribution of `f.measure` after t_f, with respect to lambda = eps t_f.
inline FisherPoint fisher_point(const HamiltonianSpec& spec, const FisherSpec& f, int n, double tol) {
  FisherPoint out;
  out.n = n;
  out.lambda = effective_rate(spec) * f.t_f;
  out.qfi = closed_form_qfi(ClosedFormQfi::bs_epsilon, n);
  const HilbertSpace space = space_for(spec);
  std::map<Mode, std::size_t> occ;
  for (Mode m : f.occupied) {
    if (!space.contains(m)) throw ConfigError("fisher.occupied names a missing mode");
    occ[m] = static_cast<std::size_t>(n);
  }
  const StateVector psi0 = fock_state(space, occ);
  const std::size_t levels = space.dim(f.measure);
  const std::size_t stride = space.stride(f.measure);
  const std::vector<double> times{f.t_f};
  ProbabilityModel model;
  model.evaluate = [&](double lambda) {
    HamiltonianSpec s = spec;
    s.drive = lambda * spec.omega / (spec.xi * f.t_f);
    if (s.drive < 0.0) throw std::invalid_argument("lambda must be non-negative");
    const Trajectory traj = evolve(build_hamiltonian(s), psi0, times, tol);
    out.max_norm_error = std::max(out.max_norm_error, traj.max_norm_error);
    const auto& psi = traj.states.back();
    out.top_level = std::max(out.top_level, top_level_population(psi, f.measure));
    std::vector<double> p(levels, 0.0);
    for (std::size_t i = 0; i < psi.dim(); ++i) p[(i / stride) % levels] += std::norm(psi.amplitudes()(static_cast<Eigen::Index>(i)));
    return p;
  };
  const FisherEstimate est = cfi(model, out.lambda, f.step, {.richardson = f.richardson});
  out.cfi = est.value;
  out.excluded_mass = est.excluded_mass;
  out.deficit = est.deficit;
  return out;
}

/// Applies overrides, expands the sweep and runs every point.
inline ExperimentResult run(ExperimentConfig cfg, const RunOptions& opt = {}) {
  if (opt.nmax) {
    if (*opt.nmax < 1) throw ConfigError("--nmax must be at least 1");
    cfg.hamiltonian.n_max = Truncation::uniform(*opt.nmax);
  }
  if (opt.tol) {
    if (!(*opt.tol > 0.0 && *opt.tol <= 1e-4)) throw ConfigError("--tol must lie in (0, 1e-4]");
    cfg.tol = *opt.tol;
  }
  ExperimentResult result;
  result.config = cfg;

  if (cfg.fisher) {
    const auto& f = *cfg.fisher;
    result.fisher.resize(f.n_values.size());
    detail::parallel_for(f.n_values.size(), opt.jobs, [&](std::size_t i) {
      result.fisher[i] = fisher_point(cfg.hamiltonian, f, f.n_values[i], cfg.tol);
    });
    return result;
  }

  // Cartesian product of the sweep axes (last axis fastest), times initial states.
  std::vector<std::vector<std::pair<std::string, double>>> points{{}};
  for (const auto& axis : cfg.sweep) {
    std::vector<std::vector<std::pair<std::string, double>>> next;
    for (const auto& p : points)
      for (double v : axis.values) {
        auto q = p;
        q.emplace_back(axis.parameter, v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  struct Task {
    std::vector<std::pair<std::string, double>> point;
    HamiltonianSpec spec;
    const StateSpec* init;
    std::string stem;
  };
  std::vector<Task> tasks;
  for (const auto& p : points) {
    HamiltonianSpec spec = cfg.hamiltonian;
    std::string stem = cfg.scenario;
    for (const auto& [name, v] : p) {
      detail::apply_parameter(spec, name, v);
      stem += "_" + name + "-" + detail::format_value(v);
    }
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    for (const auto& init : cfg.initial_states) {
      std::string s = stem;
      if (cfg.initial_states.size() > 1) s += "_" + init.label();
      tasks.push_back({p, spec, &init, std::move(s)});
    }
  }
  std::set<std::string> stems;
  for (const auto& t : tasks)
    if (!stems.insert(t.stem).second) throw ConfigError("two runs share the output name '" + t.stem + "'");

  result.trajectories.resize(tasks.size());
  detail::parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
    auto r = simulate(tasks[i].spec, *tasks[i].init, cfg, cfg.tol);
    r.stem = tasks[i].stem;
    r.point = tasks[i].point;
    result.trajectories[i] = std::move(r);
  });
  return result;
}

inline ExperimentResult run(const json& config, const RunOptions& opt = {}) { return run(parse_config(config), opt); }

// ---------------------------------------------------------------------------
// Output

/// Header row plus one row per time, 12 significant digits.
inline std::string trajectory_csv(const TrajectoryResult& r) {
  std::string out = "t";
  for (const auto& c : r.columns) out += "," + c.name;
  out += "\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out += detail::format_value(r.times[k]);
    for (const auto& c : r.columns) out += "," + detail::format_value(c.values[k]);
    out += "\n";
  }
  return out;
}

inline std::string fisher_csv(const std::vector<FisherPoint>& pts) {
  std::string out = "n,lambda,cfi,qfi,crb_cfi,crb_qfi,excluded_mass,deficit\n";
  for (const auto& p : pts) {
    out += std::to_string(p.n);
    for (double v : {p.lambda, p.cfi, p.qfi, cramer_rao(std::max(p.cfi, 0.0)), cramer_rao(p.qfi), p.excluded_mass, p.deficit})
      out += "," + detail::format_value(v);
    out += "\n";
  }
  return out;
}

/// Sweep coordinates, state label and the final value of every column.
inline std::string final_values_csv(const ExperimentResult& r) {
  std::string out;
  const auto& cfg = r.config;
  for (const auto& axis : cfg.sweep) out += axis.parameter + ",";
  out += "state";
  for (const auto& o : cfg.outputs) out += "," + o.name;
  out += "\n";
  for (const auto& t : r.trajectories) {
    for (const auto& [name, v] : t.point) out += detail::format_value(v) + ",";
    out += t.state_label;
    for (const auto& c : t.columns) out += "," + detail::format_value(c.values.back());
    out += "\n";
  }
  return out;
}

inline json summary_json(const ExperimentResult& r) {
  json s;
  s["schema_version"] = kSchemaVersion;
  s["scenario"] = r.config.scenario;
  s["tol"] = r.config.tol;
  const auto& h = r.config.hamiltonian;
  // back to kHz at the CSV precision so config values read back unchanged
  const auto khz = [](double w) { return std::stod(detail::format_value(angular_to_khz(w))); };
  s["hamiltonian"] = {{"kind", std::string(kind_name(h.kind))},
                      {"xi_khz", khz(h.xi)},
                      {"omega_khz", khz(h.omega)},
                      {"drive_khz", khz(h.drive)},
                      {"g_b_khz", khz(h.g_b)},
                      {"phi", h.phi},
                      {"eta_b", h.eta_b},
                      {"include_residual", h.include_residual},
                      {"include_ac_stark", h.include_ac_stark},
                      {"n_max", {{"a", h.n_max.a}, {"b", h.n_max.b}, {"c", h.n_max.c}}}};
  if (!r.fisher.empty()) {
    json pts = json::array();
    for (const auto& p : r.fisher)
      pts.push_back({{"n", p.n},
                     {"lambda", p.lambda},
                     {"cfi", p.cfi},
                     {"qfi", p.qfi},
                     {"excluded_mass", p.excluded_mass},
                     {"deficit", p.deficit},
                     {"max_norm_error", p.max_norm_error},
                     {"top_level_population", p.top_level}});
    s["fisher"] = std::move(pts);
    s["weak_coupling_advisory"] = h.weak_coupling_advisory();
    s["files"] = {r.config.scenario + "_fisher.csv"};
    return s;
  }
  json runs = json::array();
  json files = json::array();
  for (const auto& t : r.trajectories) {
    json point = json::object();
    for (const auto& [name, v] : t.point) point[name] = v;
    json finals = json::object();
    for (const auto& c : t.columns) finals[c.name] = c.values.back();
    json run{{"file", t.stem + ".csv"},
             {"sweep", point},
             {"initial_state", t.state_label},
             {"final", finals},
             {"t_final", t.times.back()},
             {"max_norm_error", t.max_norm_error},
             {"substeps", t.substeps},
             {"top_level_population", t.top_level},
             {"weak_coupling_advisory", t.spec.weak_coupling_advisory()}};
    if (t.max_tail > 0.0) run["tmss_tail_mass"] = t.max_tail;
    if (t.gate_time > 0.0) run["gate_time_ms"] = t.gate_time;
    runs.push_back(std::move(run));
    files.push_back(t.stem + ".csv");
  }
  if (!r.config.sweep.empty()) files.push_back(r.config.scenario + "_final.csv");
  s["runs"] = std::move(runs);
  s["files"] = std::move(files);
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

/// Writes every CSV plus <scenario>_summary.json into `dir` from a single thread.
inline std::vector<std::filesystem::path> write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    written.push_back(dir / name);
  };
  for (const auto& t : r.trajectories) put(t.stem + ".csv", trajectory_csv(t));
  if (!r.fisher.empty()) put(r.config.scenario + "_fisher.csv", fisher_csv(r.fisher));
  if (!r.config.sweep.empty() && !r.trajectories.empty()) put(r.config.scenario + "_final.csv", final_values_csv(r));
  put(r.config.scenario + "_summary.json", summary_json(r).dump(2) + "\n");
  return written;
}

}  // namespace phonon::experiment
