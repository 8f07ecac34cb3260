#pragma once

#include <Eigen/Dense>

#include "covsteer/block_operators.hpp"

namespace covsteer {

/// Closed-loop quantities for a K-form lifted gain, computed once and shared
/// by objective and gradient evaluations.
struct ClosedLoop {
  Eigen::MatrixXd inverse;        // L = (I - Hu K)^-1
  Eigen::MatrixXd theta;          // K L
  Eigen::MatrixXd terminal_map;   // F L
  Eigen::MatrixXd terminal_cov;   // F L Stilde L^T F^T
  Eigen::MatrixXd theta_stilde;   // Theta Stilde
  double feedback_energy = 0.0;   // tr(Theta Stilde Theta^T)
};

ClosedLoop evaluate_closed_loop(const Eigen::MatrixXd& K, const BlockOperators& ops);

/// Gradient with respect to K (unmasked) of
///   tr(Theta Stilde Theta^T) + <terminal_weight, S_N>
/// for symmetric terminal_weight, using dL = L Hu dK L.
Eigen::MatrixXd closed_loop_gradient(const ClosedLoop& cl, const Eigen::MatrixXd& terminal_weight,
                                     const BlockOperators& ops);

}  // namespace covsteer
