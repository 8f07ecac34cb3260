#include "covsteer/commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "covsteer/bench.hpp"
#include "covsteer/ccp.hpp"
#include "covsteer/config.hpp"
#include "covsteer/io.hpp"
#include "covsteer/kl_nlp.hpp"
#include "covsteer/simulate.hpp"

namespace covsteer {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, path.string() + ": cannot write");
  return out;
}

SolveReport solve_scenario(const Scenario& s, const BlockOperators& ops) {
  if (s.cost == CostKind::KL) return qn_minimize(KlObjective(s.problem, ops), s.qn);
  return ccp_minimize(DcObjective(s.problem, ops), s.ccp);
}

}  // namespace

int cmd_solve(const std::string& config_path, const std::string& out_dir, const std::vector<std::string>& overrides,
              std::ostream& log, std::ostream& err) {
  try {
    const Scenario s = load_scenario(config_path, overrides);
    const BlockOperators ops = assemble(s.problem);
    const SolveReport report = solve_scenario(s, ops);
    const std::vector<GaussianD> stages = stage_moments(report.policy, ops, s.problem);
    const std::string solver = s.cost == CostKind::KL ? "NLP" : "CCP";

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_json_file((dir / "report.json").string(), report_to_json(report, solver, to_string(s.cost), stages));
    write_json_file((dir / "policy.json").string(), policy_to_json(report.policy, ops));
    {
      auto out = open_output(dir / "ellipses.csv");
      write_ellipses_csv(out, stages);
    }
    {
      auto out = open_output(dir / "trace.csv");
      write_trace_csv(out, report);
    }

    log << solver << " (" << to_string(s.cost) << "): " << to_string(report.termination) << " after "
        << report.iterations << " iterations, " << format_number(report.wall_seconds) << " s\n"
        << "objective " << format_number(report.final_objective()) << "\n"
        << "terminal covariance\n" << report.terminal.cov() << "\n";
    if (!converged(report.termination)) {
      err << "warning: iteration limit reached before convergence\n";
      return kExitMaxIters;
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    if (opts.n_paths < 1) throw Error(ErrorKind::InvalidInput, "--paths must be positive");
    if (opts.keep_paths < 0) throw Error(ErrorKind::InvalidInput, "--keep-paths must be non-negative");
    const Scenario s = load_scenario(opts.config_path, opts.overrides);
    const BlockOperators ops = assemble(s.problem);
    const Policy policy = opts.policy_path.empty() ? solve_scenario(s, ops).policy
                                                   : policy_from_json(read_json_file(opts.policy_path), ops);
    const std::uint64_t seed = opts.seed.value_or(s.seed);
    const RolloutBatch batch = rollout(policy, s.problem, ops, seed, opts.n_paths);

    const fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    {
      auto out = open_output(dir / "paths.csv");
      write_paths_csv(out, batch, opts.keep_paths);
    }
    if (batch.n_paths >= 2) {
      auto out = open_output(dir / "empirical.csv");
      write_empirical_csv(out, batch);
    } else {
      err << "warning: empirical.csv needs at least 2 paths; skipped\n";
    }
    log << "simulated " << batch.n_paths << " paths over " << batch.horizon << " stages (seed " << seed << ")\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_bench(const BenchOptions& opts, std::ostream& log, std::ostream& err) {
  std::vector<BenchRecord> records;
  fs::path target;
  try {
    const Scenario s = load_scenario(opts.config_path, opts.overrides);
    if (opts.horizons.empty() || opts.gammas.empty()) throw Error(ErrorKind::InvalidInput, "empty N or gamma list");
    std::vector<SolverKind> solvers;
    for (const auto& name : opts.solvers) solvers.push_back(parse_solver(name));
    if (solvers.empty()) {
      if (s.cost == CostKind::Wasserstein) solvers.push_back(SolverKind::CCP);
      solvers.push_back(SolverKind::NLP);
    }
    BenchSettings settings;
    settings.repetitions = opts.repetitions;
    settings.ccp = s.ccp;
    settings.qn = s.qn;

    target = opts.out_path;
    if (fs::is_directory(target)) target /= "bench.csv";
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    auto out = open_output(target);

    records = run_bench(problem_family(s), s.cost, opts.horizons, opts.gammas, solvers, settings);
    write_bench_csv(out, records);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  int failures = 0;
  for (const auto& r : records) {
    log << to_string(r.solver) << " N=" << r.N << " gamma=" << r.gamma << ": "
        << (r.error.empty() ? format_number(r.wall_seconds) + " s" : "failed (" + r.error + ")") << "\n";
    failures += !r.error.empty();
  }
  log << "wrote " << records.size() << " records to " << target.string() << "\n";
  return failures ? kExitMaxIters : kExitOk;
}

}  // namespace covsteer
