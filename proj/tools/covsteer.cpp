// covsteer solve|simulate|bench

#include <iostream>

#include "CLI11.hpp"
#include "covsteer/commands.hpp"

int main(int argc, char** argv) {
  using namespace covsteer;

  CLI::App app{"Covariance steering toward a goal Gaussian"};
  app.require_subcommand(1);

  std::string config;
  std::string out = ".";
  std::vector<std::string> overrides;

  auto* solve = app.add_subcommand("solve", "Synthesize a policy and write report/policy/ellipse/trace files");
  solve->add_option("--config", config, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  solve->add_option("--out", out, "Output directory")->capture_default_str();
  solve->add_option("--set", overrides, "Override a config field, e.g. --set lambda=70 (repeatable)");

  SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo rollouts of a policy");
  simulate->add_option("--config", sim.config_path, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--policy", sim.policy_path, "policy.json from `solve` (solves in-process if omitted)")
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out_dir, "Output directory")->default_val(".");
  simulate->add_option("--paths", sim.n_paths, "Number of sample paths")->capture_default_str();
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "RNG seed (default: the scenario seed)");
  simulate->add_option("--keep-paths", sim.keep_paths, "Cap on paths written to paths.csv")->capture_default_str();
  simulate->add_option("--set", sim.overrides, "Override a config field (repeatable)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time CCP against the generic NLP over (N, gamma) instances");
  bench_cmd->add_option("--config", bench.config_path, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--out", bench.out_path, "CSV path or directory")->default_val("bench.csv");
  bench_cmd->add_option("--n-list", bench.horizons, "Comma-separated horizons")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--gamma-list", bench.gammas, "Comma-separated noise intensities")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--solvers", bench.solvers, "Comma-separated subset of CCP,NLP")->delimiter(',');
  bench_cmd->add_option("--reps", bench.repetitions, "Repetitions per cell (median is reported)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--set", bench.overrides, "Override a config field (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  if (solve->parsed()) return cmd_solve(config, out, overrides, std::cout, std::cerr);
  if (simulate->parsed()) {
    if (*seed_opt) sim.seed = sim_seed;
    return cmd_simulate(sim, std::cout, std::cerr);
  }
  return cmd_bench(bench, std::cout, std::cerr);
}
