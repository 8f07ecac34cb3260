#include "covsteer/closed_loop.hpp"

namespace covsteer {

ClosedLoop evaluate_closed_loop(const Eigen::MatrixXd& K, const BlockOperators& ops) {
  ClosedLoop cl;
  cl.inverse = closed_loop_inverse(K, ops);
  cl.theta = K * cl.inverse.triangularView<Eigen::Lower>();
  cl.terminal_map = cl.inverse.bottomRows(ops.nx);
  cl.theta_stilde = cl.theta * ops.Stilde;
  cl.feedback_energy = cl.theta_stilde.cwiseProduct(cl.theta).sum();
  cl.terminal_cov = symmetrize(Eigen::MatrixXd(cl.terminal_map * ops.Stilde * cl.terminal_map.transpose()));
  return cl;
}

Eigen::MatrixXd closed_loop_gradient(const ClosedLoop& cl, const Eigen::MatrixXd& terminal_weight,
                                     const BlockOperators& ops) {
  // d Theta = (I + Theta Hu) dK L and d(F L) = F L Hu dK L give
  //   grad = [2 (I + Theta Hu)^T Theta Stilde + 2 Hu^T P^T E P Stilde] L^T.
  const Eigen::MatrixXd& P = cl.terminal_map;
  Eigen::MatrixXd Y = 2.0 * cl.theta_stilde;
  Y.noalias() += 2.0 * ops.Hu.transpose() * (cl.theta.transpose() * cl.theta_stilde);
  Y.noalias() += 2.0 * ops.Hu.transpose() * (P.transpose() * (terminal_weight * (P * ops.Stilde)));
  return Y * cl.inverse.transpose().triangularView<Eigen::Upper>();
}

}  // namespace covsteer
