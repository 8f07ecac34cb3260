#pragma once

// KL(rho_N || rho_d) terminal cost over memoryless affine feedback
// u_k = K(k)(x_k - xbar_k) + u_ff(k):
//
//   J(K, u_ff) = |u_ff|^2 + tr(Theta Stilde Theta^T)
//              + lambda/2 [tr(S_d^-1 S_N) + (mu_d - mu_N)^T S_d^-1 (mu_d - mu_N)
//                          - n_x + log det S_d - log det S_N]
//
// with the gains embedded as K = [blkdiag(K(0), ..., K(N-1)), 0].

#include <Eigen/Dense>

#include <optional>

#include "covsteer/block_operators.hpp"
#include "covsteer/lbfgs.hpp"
#include "covsteer/solve_report.hpp"

namespace covsteer {

struct MemorylessGradient {
  std::vector<Eigen::MatrixXd> gains;
  Eigen::VectorXd feedforward;
};

class KlObjective {
 public:
  KlObjective(SteeringProblem problem, BlockOperators ops);

  const SteeringProblem& problem() const { return problem_; }
  const BlockOperators& ops() const { return ops_; }

  /// Throws NotPositiveDefinite if the terminal covariance is not PD.
  double value(const MemorylessPolicy& policy) const;
  MemorylessGradient gradient(const MemorylessPolicy& policy) const;

  /// Flat layout: each gain column-major in stage order, then u_ff.
  Eigen::Index variable_count() const;
  Eigen::VectorXd pack(const MemorylessPolicy& policy) const;
  MemorylessPolicy unpack(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack(const MemorylessGradient& grad) const;

  /// Value and flat gradient; +infinity where S_N is not PD.
  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

 private:
  double evaluate_impl(const MemorylessPolicy& policy, Eigen::VectorXd* grad) const;

  SteeringProblem problem_;
  BlockOperators ops_;
  Eigen::LLT<Eigen::MatrixXd> goal_llt_;
  Eigen::MatrixXd goal_inverse_;
  double goal_logdet_ = 0.0;
  Eigen::VectorXd open_loop_terminal_mean_;
};

double kl_objective(const MemorylessPolicy& policy, const KlObjective& obj);
MemorylessGradient kl_gradient(const MemorylessPolicy& policy, const KlObjective& obj);

MemorylessPolicy zero_memoryless_policy(const BlockOperators& ops);

SolveReport qn_minimize(const KlObjective& obj, const QuasiNewtonSettings& settings = {},
                        const std::optional<MemorylessPolicy>& init = std::nullopt);

}  // namespace covsteer
