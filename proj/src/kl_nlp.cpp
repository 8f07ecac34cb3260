#include "covsteer/kl_nlp.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "covsteer/closed_loop.hpp"
#include "covsteer/matfun.hpp"

namespace covsteer {

KlObjective::KlObjective(SteeringProblem problem, BlockOperators ops)
    : problem_(std::move(problem)), ops_(std::move(ops)) {
  problem_.validate();
  goal_llt_.compute(problem_.goal.cov());
  goal_inverse_ = goal_llt_.solve(Eigen::MatrixXd::Identity(ops_.nx, ops_.nx));
  goal_inverse_ = symmetrize(goal_inverse_);
  goal_logdet_ = logdet_pd(problem_.goal.cov());
  open_loop_terminal_mean_ = ops_.Gamma.bottomRows(ops_.nx) * problem_.init.mean();
}

Eigen::Index KlObjective::variable_count() const {
  return Eigen::Index(ops_.horizon) * ops_.nu * ops_.nx + Eigen::Index(ops_.horizon) * ops_.nu;
}

Eigen::VectorXd KlObjective::pack(const MemorylessPolicy& policy) const {
  Eigen::VectorXd x(variable_count());
  const Eigen::Index block = Eigen::Index(ops_.nu) * ops_.nx;
  if (policy.gains.size() != static_cast<std::size_t>(ops_.horizon) || policy.feedforward.size() != ops_.mask.rows()) {
    throw Error(ErrorKind::DimMismatch, "KlObjective::pack: policy does not match the problem");
  }
  for (int k = 0; k < ops_.horizon; ++k) {
    const auto& g = policy.gains[static_cast<std::size_t>(k)];
    if (g.rows() != ops_.nu || g.cols() != ops_.nx) throw Error(ErrorKind::DimMismatch, "KlObjective::pack: gain shape");
    x.segment(k * block, block) = g.reshaped();
  }
  x.tail(ops_.mask.rows()) = policy.feedforward;
  return x;
}

Eigen::VectorXd KlObjective::pack(const MemorylessGradient& grad) const {
  return pack(MemorylessPolicy{grad.gains, grad.feedforward});
}

MemorylessPolicy KlObjective::unpack(const Eigen::VectorXd& x) const {
  if (x.size() != variable_count()) throw Error(ErrorKind::DimMismatch, "KlObjective::unpack: wrong length");
  const Eigen::Index block = Eigen::Index(ops_.nu) * ops_.nx;
  MemorylessPolicy p;
  p.gains.reserve(static_cast<std::size_t>(ops_.horizon));
  for (int k = 0; k < ops_.horizon; ++k) {
    p.gains.emplace_back(x.segment(k * block, block).reshaped(ops_.nu, ops_.nx));
  }
  p.feedforward = x.tail(ops_.mask.rows());
  return p;
}

double KlObjective::evaluate_impl(const MemorylessPolicy& policy, Eigen::VectorXd* grad) const {
  const Eigen::MatrixXd K = policy.embedded(ops_);
  const Eigen::VectorXd& uff = policy.feedforward;
  if (uff.size() != ops_.mask.rows()) throw Error(ErrorKind::DimMismatch, "KlObjective: feedforward length");
  const ClosedLoop cl = evaluate_closed_loop(K, ops_);

  Eigen::LLT<Eigen::MatrixXd> terminal_llt(cl.terminal_cov);
  if (terminal_llt.info() != Eigen::Success || !(terminal_llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw Error(ErrorKind::NotPositiveDefinite, "KlObjective: terminal covariance is not positive definite");
  }
  const double terminal_logdet = 2.0 * terminal_llt.matrixLLT().diagonal().array().log().sum();

  const Eigen::MatrixXd W = ops_.terminal_input_map();
  const Eigen::VectorXd gap = problem_.goal.mean() - (open_loop_terminal_mean_ + W * uff);
  const Eigen::VectorXd weighted_gap = goal_llt_.solve(gap);
  const double lambda = problem_.lambda;
  const double kl = 0.5 * (goal_inverse_.cwiseProduct(cl.terminal_cov).sum() + gap.dot(weighted_gap) -
                           double(ops_.nx) + goal_logdet_ - terminal_logdet);
  const double value = uff.squaredNorm() + cl.feedback_energy + lambda * kl;

  if (grad) {
    const Eigen::MatrixXd terminal_inverse = terminal_llt.solve(Eigen::MatrixXd::Identity(ops_.nx, ops_.nx));
    const Eigen::MatrixXd weight = 0.5 * lambda * symmetrize(Eigen::MatrixXd(goal_inverse_ - terminal_inverse));
    const Eigen::MatrixXd full = closed_loop_gradient(cl, weight, ops_);
    grad->resize(variable_count());
    const Eigen::Index block = Eigen::Index(ops_.nu) * ops_.nx;
    for (int k = 0; k < ops_.horizon; ++k) {
      grad->segment(k * block, block) =
          full.block(Eigen::Index(k) * ops_.nu, Eigen::Index(k) * ops_.nx, ops_.nu, ops_.nx).reshaped();
    }
    grad->tail(ops_.mask.rows()) = 2.0 * uff - lambda * W.transpose() * weighted_gap;
  }
  return value;
}

double KlObjective::value(const MemorylessPolicy& policy) const { return evaluate_impl(policy, nullptr); }

MemorylessGradient KlObjective::gradient(const MemorylessPolicy& policy) const {
  Eigen::VectorXd g;
  evaluate_impl(policy, &g);
  const MemorylessPolicy unpacked = unpack(g);
  return {unpacked.gains, unpacked.feedforward};
}

double KlObjective::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  try {
    return evaluate_impl(unpack(x), &grad);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotPositiveDefinite) return std::numeric_limits<double>::infinity();
    throw;
  }
}

double kl_objective(const MemorylessPolicy& policy, const KlObjective& obj) { return obj.value(policy); }

MemorylessGradient kl_gradient(const MemorylessPolicy& policy, const KlObjective& obj) {
  return obj.gradient(policy);
}

MemorylessPolicy zero_memoryless_policy(const BlockOperators& ops) {
  return MemorylessPolicy{std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(ops.horizon),
                                                       Eigen::MatrixXd::Zero(ops.nu, ops.nx)),
                          Eigen::VectorXd::Zero(ops.mask.rows())};
}

SolveReport qn_minimize(const KlObjective& obj, const QuasiNewtonSettings& settings,
                        const std::optional<MemorylessPolicy>& init) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::VectorXd x0 = obj.pack(init ? *init : zero_memoryless_policy(obj.ops()));
  const QnResult qn = lbfgs_minimize(
      [&obj](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return obj.evaluate(x, g); }, x0, settings);

  SolveReport report;
  MemorylessPolicy policy = obj.unpack(qn.x);
  report.terminal = terminal_moments(policy, obj.ops(), obj.problem());
  report.policy = std::move(policy);
  report.objective_trace = qn.trace;
  report.trace_wall_ms = qn.trace_wall_ms;
  report.iterations = qn.iterations;
  report.termination = qn.termination;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace covsteer
