#pragma once

// The Wasserstein-cost problem posed directly over the history gain K and
// u_ff, with no change of variables:
//
//   J(K, u_ff) = |u_ff|^2 + tr(K L Stilde L^T K^T) + lambda W^2(N(mu_N, S_N), goal),
//   L = (I - Hu K)^-1.
//
// This is the generic nonlinear-programming baseline the convex-concave
// procedure is benchmarked against.

#include <Eigen/Dense>

#include <optional>

#include "covsteer/block_operators.hpp"
#include "covsteer/lbfgs.hpp"
#include "covsteer/solve_report.hpp"

namespace covsteer {

class WassersteinKObjective {
 public:
  WassersteinKObjective(SteeringProblem problem, BlockOperators ops);

  const SteeringProblem& problem() const { return problem_; }
  const BlockOperators& ops() const { return ops_; }

  /// Free entries of K (mask order) followed by u_ff.
  Eigen::Index variable_count() const;
  Eigen::VectorXd pack(const HistoryPolicy& k_policy) const;
  HistoryPolicy unpack(const Eigen::VectorXd& x) const;

  double value(const HistoryPolicy& k_policy) const;
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

 private:
  SteeringProblem problem_;
  BlockOperators ops_;
  Eigen::MatrixXd goal_sqrt_;
  Eigen::VectorXd open_loop_terminal_mean_;
};

SolveReport nlp_minimize(const WassersteinKObjective& obj, const QuasiNewtonSettings& settings = {},
                         const std::optional<HistoryPolicy>& init = std::nullopt);

}  // namespace covsteer
