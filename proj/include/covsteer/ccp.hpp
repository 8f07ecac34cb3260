#pragma once

// Wasserstein terminal cost as a difference of convex functions over
// (u_ff, Theta), minimized by the convex-concave procedure.
//
//   J(u_ff, Theta) = J1(u_ff) + J2(Theta) + J3(Theta) - J4(Theta)
//   J1 = |u_ff|^2 + lambda |F(Gamma mu0 + Hu u_ff) - mu_d|^2
//   J2 = tr(Theta Stilde Theta^T)
//   J3 = lambda (tr(P Stilde P^T) + tr(S_d)),        P = F (I + Hu Theta)
//   J4 = 2 lambda |sqrt(S_d) P R|_*,                 R R^T = Stilde
//
// With S_N = P Stilde P^T this is E[u^T u] + lambda W^2(N(mu_N, S_N), goal).
//
// The solver works in whitened coordinates Psi = Theta L, where L is the
// lower-triangular Cholesky factor of Stilde. Lower-triangular L maps the
// causal mask onto itself, and in Psi the convex surrogate separates into one
// small ridge system per column, each solved by matrix-free CG.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "covsteer/block_operators.hpp"
#include "covsteer/solve_report.hpp"

namespace covsteer {

struct DcTerms {
  double j1 = 0.0;
  double j2 = 0.0;
  double j3 = 0.0;
  double j4 = 0.0;

  double total() const { return j1 + j2 + j3 - j4; }
};

struct CcpSettings {
  double epsilon = 1e-5;
  int max_iters = 200;
  double inner_tol = 1e-8;
  int inner_max_iters = 50;
};

class DcObjective {
 public:
  DcObjective(SteeringProblem problem, BlockOperators ops);

  const SteeringProblem& problem() const { return problem_; }
  const BlockOperators& ops() const { return ops_; }
  const Eigen::MatrixXd& goal_cov_sqrt() const { return goal_sqrt_; }
  /// Lower-triangular R with R R^T = Stilde.
  const Eigen::MatrixXd& stilde_factor() const { return factor_; }
  /// F Hu.
  const Eigen::MatrixXd& terminal_input_map() const { return terminal_input_; }

  DcTerms eval_terms(const Eigen::VectorXd& uff, const Eigen::MatrixXd& theta) const;
  double value(const Eigen::VectorXd& uff, const Eigen::MatrixXd& theta) const {
    return eval_terms(uff, theta).total();
  }
  /// J2 + J3 - J4, the Theta-dependent part.
  double covariance_part(const Eigen::MatrixXd& theta) const;

  /// g(Theta) = (sqrt(S_d) F (I + Hu Theta) R)^T, so J4 = 2 lambda |g|_*.
  Eigen::MatrixXd g(const Eigen::MatrixXd& theta) const;
  /// Masked subgradient of J4 at theta.
  Eigen::MatrixXd j4_subgradient(const Eigen::MatrixXd& theta) const;
  /// Masked gradient of J2 + J3 at theta.
  Eigen::MatrixXd convex_gradient(const Eigen::MatrixXd& theta) const;

  Eigen::MatrixXd whiten(const Eigen::MatrixXd& theta) const;
  Eigen::MatrixXd unwhiten(const Eigen::MatrixXd& psi) const;

  // Whitened-coordinate evaluations used by the solver.
  Eigen::MatrixXd whitened_terminal(const Eigen::MatrixXd& psi) const;  // F L + W Psi
  double whitened_covariance_part(const Eigen::MatrixXd& psi) const;
  Eigen::MatrixXd whitened_j4_subgradient(const Eigen::MatrixXd& psi) const;

 private:
  SteeringProblem problem_;
  BlockOperators ops_;
  Eigen::MatrixXd goal_sqrt_;
  Eigen::MatrixXd factor_;
  // Columns whose Cholesky pivot vanished (singular Stilde); Psi is pinned to
  // zero there.
  std::vector<bool> dead_column_;
  Eigen::MatrixXd terminal_input_;
  Eigen::MatrixXd terminal_factor_;  // F L
};

/// argmin_u |u|^2 + lambda |F Gamma mu0 + F Hu u - mu_d|^2.
Eigen::VectorXd solve_mean_subproblem(const DcObjective& obj);

/// J2(theta) + J3(theta) - J4(theta_i) - <subgradient, theta - theta_i>.
double surrogate_value(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& subgradient,
                       const Eigen::MatrixXd& theta_i, const DcObjective& obj);

SolveReport ccp_minimize(const DcObjective& obj, const CcpSettings& settings = {},
                         const std::optional<HistoryPolicy>& init = std::nullopt);

/// Lower-triangular L with L L^T = S for symmetric PSD S. Pivots below
/// tol * max diag are zeroed along with their column.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& S, double tol = 1e-13);

}  // namespace covsteer
