#pragma once

#include <Eigen/Dense>

#include <optional>
#include <variant>
#include <vector>

#include "covsteer/gaussian.hpp"
#include "covsteer/problem.hpp"

namespace covsteer {

/// Admissible support of the lifted gain K (and of Theta): control block k
/// may depend on state blocks 0..k. The trailing state block (x_N) is never
/// fed back.
class CausalMask {
 public:
  CausalMask() = default;
  CausalMask(int state_dim, int input_dim, int horizon)
      : nx_(state_dim), nu_(input_dim), horizon_(horizon) {}

  Eigen::Index rows() const { return Eigen::Index(nu_) * horizon_; }
  Eigen::Index cols() const { return Eigen::Index(nx_) * (horizon_ + 1); }

  /// Number of leading columns admissible in `row`.
  Eigen::Index prefix_cols(Eigen::Index row) const { return (row / nu_ + 1) * nx_; }
  /// First row admitting `col` (rows() if none does).
  Eigen::Index first_row(Eigen::Index col) const { return (col / nx_) * nu_; }
  bool admits(Eigen::Index row, Eigen::Index col) const { return col < prefix_cols(row); }

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> pattern() const;
  Eigen::Index free_count() const;

  /// Zeroes every entry outside the mask.
  Eigen::MatrixXd project(const Eigen::MatrixXd& x) const;
  /// Largest |entry| outside the mask; 0 when x obeys it.
  double violation(const Eigen::MatrixXd& x) const;
  /// Throws StructureViolation if x has the wrong shape or any nonzero
  /// outside the mask exceeding `tol`.
  void require(const Eigen::MatrixXd& x, const char* what, double tol = 0.0) const;

  /// Column-major walk over admissible entries.
  Eigen::VectorXd gather(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd scatter(const Eigen::VectorXd& values) const;

 private:
  int nx_ = 0;
  int nu_ = 0;
  int horizon_ = 0;
};

/// Lifted operators: x = Gamma x0 + Hu u + Hw w over the stacked trajectory,
/// x_N = F x, Stilde = Gamma S0 Gamma^T + gamma Hw Hw^T (open-loop state
/// covariance).
struct BlockOperators {
  int nx = 0;
  int nu = 0;
  int nw = 0;
  int horizon = 0;
  Eigen::MatrixXd Gamma;
  Eigen::MatrixXd Hu;
  Eigen::MatrixXd Hw;
  Eigen::MatrixXd F;
  Eigen::MatrixXd Stilde;
  CausalMask mask;

  Eigen::Index lifted_dim() const { return Eigen::Index(nx) * (horizon + 1); }
  /// F * Hu, the map from stacked inputs to x_N.
  Eigen::MatrixXd terminal_input_map() const { return Hu.bottomRows(nx); }
};

BlockOperators assemble(const SteeringProblem& problem);

enum class Parameterization { K, Theta };

/// u = K (x - xbar) + u_ff over the whole state history, stored either as K
/// itself or as Theta = K (I - Hu K)^-1.
struct HistoryPolicy {
  Eigen::MatrixXd gain;
  Eigen::VectorXd feedforward;
  Parameterization form = Parameterization::Theta;
};

/// u_k = K(k) (x_k - xbar_k) + u_ff(k).
struct MemorylessPolicy {
  std::vector<Eigen::MatrixXd> gains;
  Eigen::VectorXd feedforward;

  /// [blkdiag(K(0), ..., K(N-1)), 0] in the lifted layout.
  Eigen::MatrixXd embedded(const BlockOperators& ops) const;
};

using Policy = std::variant<HistoryPolicy, MemorylessPolicy>;

/// Theta = K (I - Hu K)^-1.
Eigen::MatrixXd theta_from_k(const Eigen::MatrixXd& K, const BlockOperators& ops);
/// K = Theta (I + Hu Theta)^-1.
Eigen::MatrixXd k_from_theta(const Eigen::MatrixXd& theta, const BlockOperators& ops);
/// (I - Hu K)^-1 by unit-lower forward substitution.
Eigen::MatrixXd closed_loop_inverse(const Eigen::MatrixXd& K, const BlockOperators& ops);

/// Lifted gain in K-form for any policy (validates the mask).
Eigen::MatrixXd history_gain(const Policy& policy, const BlockOperators& ops);
Eigen::VectorXd feedforward_of(const Policy& policy);

/// E[x] over the whole trajectory: Gamma mu0 + Hu u_ff, stacked.
Eigen::VectorXd mean_trajectory(const Eigen::VectorXd& feedforward, const BlockOperators& ops,
                                const SteeringProblem& problem);

/// Terminal Gaussian (mu_N, S_N) under the policy.
GaussianD terminal_moments(const Policy& policy, const BlockOperators& ops, const SteeringProblem& problem);

/// (mu_k, S_k) for k = 0..N.
std::vector<GaussianD> stage_moments(const Policy& policy, const BlockOperators& ops,
                                     const SteeringProblem& problem);

/// E[u^T u] = tr(Theta Stilde Theta^T) + |u_ff|^2 (either form).
double expected_control_energy(const Policy& policy, const BlockOperators& ops);

}  // namespace covsteer
