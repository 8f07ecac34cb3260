#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace covsteer {

/// Exit codes shared by the commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxIters = 2;

/// Writes report.json, policy.json, ellipses.csv and trace.csv into out_dir.
int cmd_solve(const std::string& config_path, const std::string& out_dir, const std::vector<std::string>& overrides,
              std::ostream& log, std::ostream& err);

struct SimulateOptions {
  std::string config_path;
  std::string policy_path;  // empty: solve the scenario first
  std::string out_dir;
  std::vector<std::string> overrides;
  int n_paths = 1000;
  std::optional<std::uint64_t> seed;  // defaults to the scenario seed
  int keep_paths = 1000;              // rows of paths.csv are capped at this many paths
};

/// Writes paths.csv and empirical.csv into out_dir.
int cmd_simulate(const SimulateOptions& opts, std::ostream& log, std::ostream& err);

struct BenchOptions {
  std::string config_path;
  std::string out_path;  // CSV file, or a directory that receives bench.csv
  std::vector<std::string> overrides;
  std::vector<int> horizons{10, 20, 30, 40, 50};
  std::vector<double> gammas{1.0, 0.5};
  std::vector<std::string> solvers;  // empty: CCP and NLP (NLP only for KL)
  int repetitions = 3;
};

/// Exit 0 when every record succeeded, 2 when some record carries an error.
int cmd_bench(const BenchOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace covsteer
