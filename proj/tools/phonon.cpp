// phonon: run figure scenarios or JSON configs, print trap parameters, run the acceptance suite.
//
//   phonon run <scenario|config.json> [--out DIR] [--jobs N] [--nmax N] [--tol X]
//   phonon params [--out DIR]
//   phonon verify [--jobs N] [--nmax N] [--tol X]
//
// Exit codes: 0 success, 1 failed acceptance criteria, 2 invalid input,
// 3 propagation tolerance not met.

#include "phonon/acceptance.hpp"
#include "phonon/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

namespace ex = phonon::experiment;

constexpr int kExitFailed = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitTolerance = 3;

ex::json load_config(const std::string& target) {
  const auto& names = ex::scenario_names();
  if (std::find(names.begin(), names.end(), target) != names.end()) return ex::builtin_config(target);
  std::ifstream f(target);
  if (!f) throw ex::ConfigError("'" + target + "' is neither a scenario name nor a readable config file");
  try {
    return ex::json::parse(f);
  } catch (const ex::json::parse_error& e) {
    throw ex::ConfigError("cannot parse " + target + ": " + e.what());
  }
}

void write_params(const std::filesystem::path& out) {
  const auto p = ex::params_json();
  std::cout << p.dump(2) << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    ex::write_text(out / "params.json", p.dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trapped-ion phonon dynamics: figure scenarios and acceptance checks"};
  app.require_subcommand(1);

  std::string target;
  std::string out_dir = "results";
  std::size_t jobs = 1;
  std::optional<std::size_t> nmax;
  std::optional<double> tol;

  auto* run = app.add_subcommand("run", "Run a built-in scenario or a JSON config");
  run->add_option("target", target, "fig1, fig2a, fig2b, fig3, fig4, fig5, fig6, params, or a config path")->required();
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--jobs", jobs, "Parallel sweep points")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--nmax", nmax, "Override every bosonic truncation");
  run->add_option("--tol", tol, "Propagation tolerance");

  auto* params = app.add_subcommand("params", "Print z0, xi and eta_b for the default trap");
  params->add_option("--out", out_dir, "Also write params.json here");

  auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_option("--jobs", jobs, "Parallel sweep points")->check(CLI::PositiveNumber);
  verify->add_option("--nmax", nmax, "Uniform base truncation");
  verify->add_option("--tol", tol, "Propagation tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (params->parsed()) {
      write_params(params->count("--out") ? std::filesystem::path(out_dir) : std::filesystem::path());
      return 0;
    }
    if (run->parsed()) {
      if (target == "params") {
        write_params(out_dir);
        return 0;
      }
      ex::RunOptions opt;
      opt.jobs = jobs;
      opt.nmax = nmax;
      opt.tol = tol;
      const auto result = ex::run(load_config(target), opt);
      for (const auto& path : ex::write_outputs(result, out_dir)) std::cout << path.string() << "\n";
      return 0;
    }
    phonon::acceptance::Options opt;
    opt.jobs = jobs;
    opt.nmax = nmax;
    if (tol) opt.tol = *tol;
    bool all = true;
    phonon::acceptance::run_all(opt, [&](const phonon::acceptance::CriterionResult& r) {
      std::cout << phonon::acceptance::format_line(r) << std::endl;
      all = all && r.pass;
    });
    return all ? 0 : kExitFailed;
  } catch (const phonon::ToleranceError& e) {
    std::cerr << "propagation tolerance not met: " << e.what() << "\n";
    return kExitTolerance;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}
