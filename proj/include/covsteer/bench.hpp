#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "covsteer/ccp.hpp"
#include "covsteer/lbfgs.hpp"
#include "covsteer/problem.hpp"

namespace covsteer {

enum class SolverKind { CCP, NLP };
enum class CostKind { Wasserstein, KL };

std::string to_string(SolverKind s);
std::string to_string(CostKind c);
SolverKind parse_solver(const std::string& name);
CostKind parse_cost(const std::string& name);

struct BenchRecord {
  SolverKind solver = SolverKind::CCP;
  CostKind cost = CostKind::Wasserstein;
  int N = 0;
  double gamma = 0.0;
  double wall_seconds = 0.0;  // median over repetitions
  int iterations = 0;
  double final_objective = 0.0;
  std::string error;  // empty on success
};

/// Builds the instance for a given horizon and noise intensity.
using ProblemFamily = std::function<SteeringProblem(int horizon, double gamma)>;

struct BenchSettings {
  int repetitions = 3;
  CcpSettings ccp;
  QuasiNewtonSettings qn;
};

/// For each (N, gamma, solver), in that nesting order, solves `repetitions`
/// times and records the median wall time. CCP runs only on the Wasserstein
/// cost; NLP is the K-form history solver for Wasserstein and the memoryless
/// solver for KL. Failures land in BenchRecord::error.
std::vector<BenchRecord> run_bench(const ProblemFamily& family, CostKind cost, const std::vector<int>& horizons,
                                   const std::vector<double>& gammas, const std::vector<SolverKind>& solvers,
                                   const BenchSettings& settings = {});

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records);

}  // namespace covsteer
