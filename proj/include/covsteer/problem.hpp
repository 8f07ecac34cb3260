#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "covsteer/error.hpp"
#include "covsteer/gaussian.hpp"

namespace covsteer {

/// x_{k+1} = A x_k + B u_k + G w_k for one stage.
struct Stage {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd G;
};

/// Linear time-varying system over a finite horizon; one Stage per step.
class LtvSystem {
 public:
  LtvSystem() = default;

  explicit LtvSystem(std::vector<Stage> stages) : stages_(std::move(stages)) {
    if (stages_.empty()) throw Error(ErrorKind::InvalidInput, "LtvSystem: need at least one stage");
    const auto nx = stages_.front().A.rows();
    const auto nu = stages_.front().B.cols();
    const auto nw = stages_.front().G.cols();
    if (nx <= 0 || nu <= 0 || nw <= 0) {
      throw Error(ErrorKind::DimMismatch, "LtvSystem: state, input and noise dimensions must be positive");
    }
    for (std::size_t k = 0; k < stages_.size(); ++k) {
      const Stage& s = stages_[k];
      const std::string where = "LtvSystem stage " + std::to_string(k);
      if (s.A.rows() != nx || s.A.cols() != nx) throw Error(ErrorKind::DimMismatch, where + ": A must be n_x x n_x");
      if (s.B.rows() != nx || s.B.cols() != nu) throw Error(ErrorKind::DimMismatch, where + ": B must be n_x x n_u");
      if (s.G.rows() != nx || s.G.cols() != nw) throw Error(ErrorKind::DimMismatch, where + ": G must be n_x x n_w");
      if (!s.A.allFinite() || !s.B.allFinite() || !s.G.allFinite()) {
        throw Error(ErrorKind::InvalidInput, where + ": non-finite entries");
      }
    }
  }

  /// Broadcasts a single (A, B, G) triple across `horizon` stages.
  static LtvSystem time_invariant(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& G,
                                  int horizon) {
    if (horizon <= 0) throw Error(ErrorKind::InvalidInput, "LtvSystem: horizon must be positive");
    return LtvSystem(std::vector<Stage>(static_cast<std::size_t>(horizon), Stage{A, B, G}));
  }

  int horizon() const { return static_cast<int>(stages_.size()); }
  int state_dim() const { return static_cast<int>(stages_.front().A.rows()); }
  int input_dim() const { return static_cast<int>(stages_.front().B.cols()); }
  int noise_dim() const { return static_cast<int>(stages_.front().G.cols()); }
  const Stage& stage(int k) const { return stages_.at(static_cast<std::size_t>(k)); }
  const std::vector<Stage>& stages() const { return stages_; }

 private:
  std::vector<Stage> stages_;
};

/// Steer N(init) toward N(goal) in `system.horizon()` steps, minimizing
/// E[sum u^T u] + lambda * terminal distance. Noise covariance is gamma * I.
struct SteeringProblem {
  LtvSystem system;
  GaussianD init;
  GaussianD goal;
  double lambda = 1.0;
  double gamma = 1.0;

  int horizon() const { return system.horizon(); }
  int state_dim() const { return system.state_dim(); }
  int input_dim() const { return system.input_dim(); }
  int noise_dim() const { return system.noise_dim(); }

  void validate() const {
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidInput, "lambda must be positive");
    if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidInput, "gamma must be positive");
    if (init.dim() != state_dim()) throw Error(ErrorKind::DimMismatch, "init: dimension differs from n_x");
    if (goal.dim() != state_dim()) throw Error(ErrorKind::DimMismatch, "goal: dimension differs from n_x");
    require_positive_definite(init, "init.cov");
    require_positive_definite(goal, "goal.cov");
  }
};

}  // namespace covsteer
