#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "covsteer/block_operators.hpp"
#include "covsteer/gaussian.hpp"

namespace covsteer {

/// Closed-loop sample paths. Path p, stage k lives in column p * (N + 1) + k
/// of `states` and column p * N + k of `inputs`.
struct RolloutBatch {
  std::uint64_t seed = 0;
  int n_paths = 0;
  int horizon = 0;
  Eigen::MatrixXd states;
  Eigen::MatrixXd inputs;

  Eigen::VectorXd state(int path, int stage) const {
    return states.col(Eigen::Index(path) * (horizon + 1) + stage);
  }
  Eigen::VectorXd input(int path, int stage) const { return inputs.col(Eigen::Index(path) * horizon + stage); }
};

/// Draws x0 ~ N(mu0, S0), w_k ~ N(0, gamma I) and applies
/// u = K (x - xbar) + u_ff along each path. Every path has its own generator
/// seeded from (seed, path), so the result does not depend on `threads`
/// (0 picks the hardware concurrency).
RolloutBatch rollout(const Policy& policy, const SteeringProblem& problem, const BlockOperators& ops,
                     std::uint64_t seed, int n_paths, unsigned threads = 0);

/// Sample mean and unbiased sample covariance of the states at `stage`.
GaussianD empirical_moments(const RolloutBatch& batch, int stage);

}  // namespace covsteer
