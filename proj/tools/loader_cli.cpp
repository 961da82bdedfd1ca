// loader: validate, run, sweep and summarize replicated-state experiments.
// Exit codes: 0 ok, 1 validation failure, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "loader/experiment.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> t_end;
  std::string out_dir = "out";
  bool trace = false;
};

loader::ScenarioConfig load(const std::string& path, const Overrides& ov) {
  auto cfg = loader::load_scenario(path);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.t_end) cfg.t_end = *ov.t_end;
  return cfg;
}

void emit_runs(const loader::ScenarioConfig& cfg, const std::vector<loader::ExperimentRun>& runs,
               const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& run : runs) loader::write_run(run, fmt::format("{}/C{}", out_dir, run.replicas));
  const auto csv = loader::summary_csv(loader::summarize(runs, cfg.steady_fraction));
  loader::write_text(out_dir + "/summary.csv", csv);
  std::cout << csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loader: replicated-state dataplane experiments"};
  app.require_subcommand(1);
  Overrides ov;
  std::string scenario;
  std::vector<std::uint32_t> sweep;
  std::string dir;
  double steady = 0.5;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", scenario, "scenario file")->required();
    sub->add_option("--seed", ov.seed, "override the scenario seed");
    sub->add_option("--t-end", ov.t_end, "override the run length in seconds");
    sub->add_option("--out-dir", ov.out_dir, "output directory");
    sub->add_flag("--trace", ov.trace, "dump the event trace to trace.txt");
  };

  auto* validate = app.add_subcommand("validate", "parse and validate a scenario, print the compiled plan");
  validate->add_option("scenario", scenario, "scenario file")->required();
  auto* run = app.add_subcommand("run", "simulate the scenario at its configured C");
  add_common(run);
  auto* sw = app.add_subcommand("sweep", "simulate one run per C value");
  add_common(sw);
  sw->add_option("-C,--replicas", sweep, "replica counts")->required()->delimiter(',');
  auto* summ = app.add_subcommand("summarize", "rebuild summary.csv from an output directory");
  summ->add_option("dir", dir, "output directory")->required();
  summ->add_option("--steady", steady, "steady-state fraction")->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      auto cfg = loader::load_scenario(scenario);
      const auto dep = loader::deploy(cfg.topo, cfg.app, cfg.deploy_options(cfg.replicas));
      std::cout << loader::plan_text(dep);
      return 0;
    }
    if (*summ) {
      const auto csv = loader::summary_csv(loader::summarize_directory(dir, steady));
      loader::write_text(dir + "/summary.csv", csv);
      std::cout << csv;
      return 0;
    }
    auto cfg = load(scenario, ov);
    if (ov.trace) cfg.trace = true;
    if (*run) {
      emit_runs(cfg, {loader::run_single(cfg, cfg.replicas)}, ov.out_dir);
    } else {
      emit_runs(cfg, loader::run_experiment(cfg, sweep), ov.out_dir);
    }
    return 0;
  } catch (const loader::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const loader::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const loader::UnsupportedPrimitive& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const loader::DisconnectedTopology& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const loader::DisconnectedTerminals& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const loader::InsufficientNodes& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const loader::InfeasibleBudget& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
