#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "covsteer/block_operators.hpp"

namespace covsteer {

enum class Termination { Converged, MaxIters, GradTol, RelFTol };

constexpr std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxIters: return "MaxIters";
    case Termination::GradTol: return "GradTol";
    case Termination::RelFTol: return "RelFTol";
  }
  return "Unknown";
}

/// True for every outcome other than running out of iterations.
constexpr bool converged(Termination t) { return t != Termination::MaxIters; }

struct SolveReport {
  /// Theta-form history policy (CCP) or memoryless gains (quasi-Newton).
  Policy policy;
  /// K-form of a history policy; empty for memoryless policies.
  std::optional<HistoryPolicy> k_policy;
  GaussianD terminal;
  /// Objective at the initial point followed by one entry per iteration.
  std::vector<double> objective_trace;
  /// Elapsed wall time (ms) at each trace entry.
  std::vector<double> trace_wall_ms;
  int iterations = 0;
  double wall_seconds = 0.0;
  Termination termination = Termination::MaxIters;

  double final_objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

}  // namespace covsteer
