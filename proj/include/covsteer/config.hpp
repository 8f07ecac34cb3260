#pragma once

// Scenario files are JSON documents:
//
//   {
//     "version": 1,
//     "system": {"n_x": 2, "n_u": 1, "n_w": 2, "A": [...], "B": [...], "G": [...]},
//     "horizon": 20, "gamma": 1.0, "lambda": 10.0, "cost": "wasserstein",
//     "init": {"mean": [0, 1], "cov": [10, 0, 0, 10]},
//     "goal": {"mean": [10, 12], "cov": [1, 0, 0, 1]},
//     "solver": {"epsilon": 1e-5, "max_iters": 200, "inner_tol": 1e-8, "inner_max_iters": 50,
//                "qn": {"memory": 10, "grad_tol": 1e-6, "rel_f_tol": 1e-9, "max_iters": 500}},
//     "seed": 1
//   }
//
// Matrices are flat row-major arrays sized by the declared dimensions. A
// time-varying system replaces A/B/G with "stages": [{"A":..,"B":..,"G":..}, ...]
// (one per step, and "horizon" then must match or be omitted). lambda
// defaults to 10 for the Wasserstein cost and 70 for KL.

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include "covsteer/bench.hpp"
#include "covsteer/ccp.hpp"
#include "covsteer/lbfgs.hpp"
#include "covsteer/problem.hpp"

namespace covsteer {

struct Scenario {
  SteeringProblem problem;
  CostKind cost = CostKind::Wasserstein;
  CcpSettings ccp;
  QuasiNewtonSettings qn;
  std::uint64_t seed = 0;
  /// Time-invariant triple when the system was given that way.
  bool time_invariant = false;
  Stage invariant_stage;
};

nlohmann::json load_config_json(const std::string& path);

/// Applies "a.b.c=value" overrides. The value is parsed as JSON when it can
/// be, otherwise taken as a string.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

Scenario parse_scenario(const nlohmann::json& doc);

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

/// Re-instantiates the scenario at another horizon / noise intensity.
/// Requires a time-invariant system unless `horizon` equals the original.
ProblemFamily problem_family(const Scenario& scenario);

}  // namespace covsteer
