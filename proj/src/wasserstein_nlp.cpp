#include "covsteer/wasserstein_nlp.hpp"

#include <chrono>
#include <cmath>

#include "covsteer/closed_loop.hpp"
#include "covsteer/matfun.hpp"

namespace covsteer {

WassersteinKObjective::WassersteinKObjective(SteeringProblem problem, BlockOperators ops)
    : problem_(std::move(problem)), ops_(std::move(ops)) {
  problem_.validate();
  goal_sqrt_ = sqrtm_psd(problem_.goal.cov());
  open_loop_terminal_mean_ = ops_.Gamma.bottomRows(ops_.nx) * problem_.init.mean();
}

Eigen::Index WassersteinKObjective::variable_count() const { return ops_.mask.free_count() + ops_.mask.rows(); }

Eigen::VectorXd WassersteinKObjective::pack(const HistoryPolicy& k_policy) const {
  if (k_policy.form != Parameterization::K) {
    throw Error(ErrorKind::InvalidInput, "WassersteinKObjective::pack: expects a K-form policy");
  }
  ops_.mask.require(k_policy.gain, "WassersteinKObjective::pack");
  if (k_policy.feedforward.size() != ops_.mask.rows()) {
    throw Error(ErrorKind::DimMismatch, "WassersteinKObjective::pack: feedforward length");
  }
  Eigen::VectorXd x(variable_count());
  x.head(ops_.mask.free_count()) = ops_.mask.gather(k_policy.gain);
  x.tail(ops_.mask.rows()) = k_policy.feedforward;
  return x;
}

HistoryPolicy WassersteinKObjective::unpack(const Eigen::VectorXd& x) const {
  if (x.size() != variable_count()) throw Error(ErrorKind::DimMismatch, "WassersteinKObjective::unpack: length");
  return {ops_.mask.scatter(x.head(ops_.mask.free_count())), x.tail(ops_.mask.rows()), Parameterization::K};
}

double WassersteinKObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  const HistoryPolicy p = unpack(x);
  const ClosedLoop cl = evaluate_closed_loop(p.gain, ops_);
  const double lambda = problem_.lambda;

  const Eigen::MatrixXd W = ops_.terminal_input_map();
  const Eigen::VectorXd mean_gap = open_loop_terminal_mean_ + W * p.feedforward - problem_.goal.mean();

  // tr((sqrt(S_d) S_N sqrt(S_d))^1/2) and its gradient sqrt(S_d) X^-1/2 sqrt(S_d) / 2.
  const auto eig = eig_sym(Eigen::MatrixXd(goal_sqrt_ * cl.terminal_cov * goal_sqrt_));
  const Eigen::VectorXd roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  const double cross = roots.sum();
  const Eigen::VectorXd inv_roots = roots.unaryExpr([](double r) { return r > 1e-150 ? 1.0 / r : 0.0; });
  const Eigen::MatrixXd inv_sqrt = eig.vectors * inv_roots.asDiagonal() * eig.vectors.transpose();

  const double w2 = mean_gap.squaredNorm() + cl.terminal_cov.trace() + problem_.goal.cov().trace() - 2.0 * cross;
  const double value = p.feedforward.squaredNorm() + cl.feedback_energy + lambda * w2;

  const Eigen::MatrixXd weight =
      lambda * symmetrize(Eigen::MatrixXd(Eigen::MatrixXd::Identity(ops_.nx, ops_.nx) -
                                          goal_sqrt_ * inv_sqrt * goal_sqrt_));
  const Eigen::MatrixXd full = closed_loop_gradient(cl, weight, ops_);
  grad.resize(variable_count());
  grad.head(ops_.mask.free_count()) = ops_.mask.gather(full);
  grad.tail(ops_.mask.rows()) = 2.0 * p.feedforward + 2.0 * lambda * W.transpose() * mean_gap;
  return value;
}

double WassersteinKObjective::value(const HistoryPolicy& k_policy) const {
  Eigen::VectorXd g;
  return evaluate(pack(k_policy), g);
}

SolveReport nlp_minimize(const WassersteinKObjective& obj, const QuasiNewtonSettings& settings,
                         const std::optional<HistoryPolicy>& init) {
  const auto start = std::chrono::steady_clock::now();
  const auto& ops = obj.ops();
  const HistoryPolicy zero{Eigen::MatrixXd::Zero(ops.mask.rows(), ops.mask.cols()),
                           Eigen::VectorXd::Zero(ops.mask.rows()), Parameterization::K};
  const QnResult qn = lbfgs_minimize(
      [&obj](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return obj.evaluate(x, g); },
      obj.pack(init ? *init : zero), settings);

  SolveReport report;
  HistoryPolicy k_policy = obj.unpack(qn.x);
  report.terminal = terminal_moments(k_policy, ops, obj.problem());
  report.policy = HistoryPolicy{theta_from_k(k_policy.gain, ops), k_policy.feedforward, Parameterization::Theta};
  report.k_policy = std::move(k_policy);
  report.objective_trace = qn.trace;
  report.trace_wall_ms = qn.trace_wall_ms;
  report.iterations = qn.iterations;
  report.termination = qn.termination;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace covsteer
