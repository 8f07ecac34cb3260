#pragma once

#include <Eigen/Dense>

#include <random>

#include "covsteer/block_operators.hpp"
#include "covsteer/problem.hpp"

namespace covsteer::testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.2) {
  const Eigen::MatrixXd m = random_matrix(rng, n, n);
  return m * m.transpose() / double(n) + floor * Eigen::MatrixXd::Identity(n, n);
}

inline GaussianD random_gaussian(std::mt19937_64& rng, Eigen::Index n) {
  return GaussianD(random_matrix(rng, n, 1, 2.0), random_spd(rng, n));
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random LTV problem with mildly stable dynamics so lifted quantities stay O(1).
inline SteeringProblem random_problem(std::mt19937_64& rng, int nx, int nu, int nw, int horizon) {
  std::vector<Stage> stages;
  for (int k = 0; k < horizon; ++k) {
    stages.push_back(Stage{Eigen::MatrixXd::Identity(nx, nx) + random_matrix(rng, nx, nx, 0.25),
                           random_matrix(rng, nx, nu), random_matrix(rng, nx, nw, 0.5)});
  }
  SteeringProblem p{LtvSystem(std::move(stages)), random_gaussian(rng, nx), random_gaussian(rng, nx),
                    std::uniform_real_distribution<double>(0.5, 20.0)(rng),
                    std::uniform_real_distribution<double>(0.2, 2.0)(rng)};
  return p;
}

inline SteeringProblem random_problem(std::mt19937_64& rng, int max_nx = 3, int max_horizon = 8) {
  const int nx = uniform_int(rng, 1, max_nx);
  return random_problem(rng, nx, uniform_int(rng, 1, nx), uniform_int(rng, 1, nx), uniform_int(rng, 1, max_horizon));
}

inline Eigen::MatrixXd random_masked(std::mt19937_64& rng, const CausalMask& mask, double scale = 0.3) {
  return mask.project(random_matrix(rng, mask.rows(), mask.cols(), scale));
}

/// The double integrator used throughout: A = [[1,1],[0,1]], B = [0,1]^T, G = I,
/// steered from N([0,1], 10 I) toward N([10,12], I).
inline SteeringProblem double_integrator(int horizon = 20, double lambda = 10.0, double gamma = 1.0) {
  Eigen::MatrixXd A(2, 2);
  A << 1, 1, 0, 1;
  Eigen::MatrixXd B(2, 1);
  B << 0, 1;
  return SteeringProblem{LtvSystem::time_invariant(A, B, Eigen::MatrixXd::Identity(2, 2), horizon),
                         GaussianD(Eigen::Vector2d(0, 1), 10.0 * Eigen::MatrixXd::Identity(2, 2)),
                         GaussianD(Eigen::Vector2d(10, 12), Eigen::MatrixXd::Identity(2, 2)), lambda, gamma};
}

inline double rel_fro(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace covsteer::testing
