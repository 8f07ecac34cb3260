#include "covsteer/block_operators.hpp"

#include <string>

namespace covsteer {

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> CausalMask::pattern() const {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> p(rows(), cols());
  for (Eigen::Index c = 0; c < cols(); ++c)
    for (Eigen::Index r = 0; r < rows(); ++r) p(r, c) = admits(r, c);
  return p;
}

Eigen::Index CausalMask::free_count() const {
  Eigen::Index n = 0;
  for (Eigen::Index r = 0; r < rows(); ++r) n += prefix_cols(r);
  return n;
}

Eigen::MatrixXd CausalMask::project(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = x;
  for (Eigen::Index r = 0; r < rows(); ++r) {
    const auto p = prefix_cols(r);
    out.row(r).tail(cols() - p).setZero();
  }
  return out;
}

double CausalMask::violation(const Eigen::MatrixXd& x) const {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < rows(); ++r) {
    const auto p = prefix_cols(r);
    if (p < cols()) worst = std::max(worst, x.row(r).tail(cols() - p).cwiseAbs().maxCoeff());
  }
  return worst;
}

void CausalMask::require(const Eigen::MatrixXd& x, const char* what, double tol) const {
  if (x.rows() != rows() || x.cols() != cols()) {
    throw Error(ErrorKind::StructureViolation, std::string(what) + ": expected " + std::to_string(rows()) + "x" +
                                                   std::to_string(cols()) + ", got " + std::to_string(x.rows()) +
                                                   "x" + std::to_string(x.cols()));
  }
  if (!x.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite entries");
  const double v = violation(x);
  if (v > tol) {
    throw Error(ErrorKind::StructureViolation,
                std::string(what) + ": nonzero entry " + std::to_string(v) + " outside the causal mask");
  }
}

Eigen::VectorXd CausalMask::gather(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd v(free_count());
  Eigen::Index i = 0;
  for (Eigen::Index c = 0; c < cols(); ++c) {
    const auto r0 = first_row(c);
    const auto n = rows() - r0;
    v.segment(i, n) = x.col(c).tail(n);
    i += n;
  }
  return v;
}

Eigen::MatrixXd CausalMask::scatter(const Eigen::VectorXd& values) const {
  if (values.size() != free_count()) {
    throw Error(ErrorKind::DimMismatch, "CausalMask::scatter: wrong number of free entries");
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows(), cols());
  Eigen::Index i = 0;
  for (Eigen::Index c = 0; c < cols(); ++c) {
    const auto r0 = first_row(c);
    const auto n = rows() - r0;
    x.col(c).tail(n) = values.segment(i, n);
    i += n;
  }
  return x;
}

BlockOperators assemble(const SteeringProblem& problem) {
  const LtvSystem& sys = problem.system;
  const int N = sys.horizon();
  const int nx = sys.state_dim();
  const int nu = sys.input_dim();
  const int nw = sys.noise_dim();
  if (problem.init.dim() != nx || problem.goal.dim() != nx) {
    throw Error(ErrorKind::DimMismatch, "assemble: init/goal dimension differs from the state dimension");
  }

  BlockOperators ops;
  ops.nx = nx;
  ops.nu = nu;
  ops.nw = nw;
  ops.horizon = N;
  const Eigen::Index m = ops.lifted_dim();

  // Gamma stacks Phi(k, 0); Hu / Hw blocks (k, i) = Phi(k, i+1) B_i / G_i,
  // built down each block column by left-multiplying with A_k.
  ops.Gamma.resize(m, nx);
  ops.Gamma.topRows(nx).setIdentity();
  ops.Hu = Eigen::MatrixXd::Zero(m, Eigen::Index(nu) * N);
  ops.Hw = Eigen::MatrixXd::Zero(m, Eigen::Index(nw) * N);
  for (int k = 0; k < N; ++k) {
    const Stage& s = sys.stage(k);
    ops.Gamma.middleRows(Eigen::Index(k + 1) * nx, nx) = s.A * ops.Gamma.middleRows(Eigen::Index(k) * nx, nx);
    ops.Hu.block(Eigen::Index(k + 1) * nx, 0, nx, Eigen::Index(k) * nu) =
        s.A * ops.Hu.block(Eigen::Index(k) * nx, 0, nx, Eigen::Index(k) * nu);
    ops.Hu.block(Eigen::Index(k + 1) * nx, Eigen::Index(k) * nu, nx, nu) = s.B;
    ops.Hw.block(Eigen::Index(k + 1) * nx, 0, nx, Eigen::Index(k) * nw) =
        s.A * ops.Hw.block(Eigen::Index(k) * nx, 0, nx, Eigen::Index(k) * nw);
    ops.Hw.block(Eigen::Index(k + 1) * nx, Eigen::Index(k) * nw, nx, nw) = s.G;
  }

  ops.F = Eigen::MatrixXd::Zero(nx, m);
  ops.F.rightCols(nx).setIdentity();

  ops.Stilde = symmetrize(Eigen::MatrixXd(ops.Gamma * problem.init.cov() * ops.Gamma.transpose() +
                                          problem.gamma * ops.Hw * ops.Hw.transpose()));
  ops.mask = CausalMask(nx, nu, N);
  return ops;
}

Eigen::MatrixXd MemorylessPolicy::embedded(const BlockOperators& ops) const {
  if (gains.size() != static_cast<std::size_t>(ops.horizon)) {
    throw Error(ErrorKind::DimMismatch, "MemorylessPolicy: expected " + std::to_string(ops.horizon) +
                                            " gains, got " + std::to_string(gains.size()));
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ops.mask.rows(), ops.mask.cols());
  for (int k = 0; k < ops.horizon; ++k) {
    const auto& g = gains[static_cast<std::size_t>(k)];
    if (g.rows() != ops.nu || g.cols() != ops.nx) {
      throw Error(ErrorKind::DimMismatch, "MemorylessPolicy: gain " + std::to_string(k) + " must be n_u x n_x");
    }
    K.block(Eigen::Index(k) * ops.nu, Eigen::Index(k) * ops.nx, ops.nu, ops.nx) = g;
  }
  return K;
}

Eigen::MatrixXd closed_loop_inverse(const Eigen::MatrixXd& K, const BlockOperators& ops) {
  ops.mask.require(K, "closed_loop_inverse");
  // Hu K is strictly block lower triangular, so I - Hu K is unit lower.
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ops.lifted_dim(), ops.lifted_dim()) - ops.Hu * K;
  return M.triangularView<Eigen::UnitLower>().solve(
      Eigen::MatrixXd::Identity(ops.lifted_dim(), ops.lifted_dim()));
}

Eigen::MatrixXd theta_from_k(const Eigen::MatrixXd& K, const BlockOperators& ops) {
  ops.mask.require(K, "theta_from_k");
  // Theta (I - Hu K) = K  <=>  (I - Hu K)^T Theta^T = K^T, an upper unit solve.
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ops.lifted_dim(), ops.lifted_dim()) - ops.Hu * K;
  Eigen::MatrixXd theta = M.transpose().triangularView<Eigen::UnitUpper>().solve(K.transpose()).transpose();
  return ops.mask.project(theta);
}

Eigen::MatrixXd k_from_theta(const Eigen::MatrixXd& theta, const BlockOperators& ops) {
  ops.mask.require(theta, "k_from_theta");
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ops.lifted_dim(), ops.lifted_dim()) + ops.Hu * theta;
  Eigen::MatrixXd K = M.transpose().triangularView<Eigen::UnitUpper>().solve(theta.transpose()).transpose();
  return ops.mask.project(K);
}

Eigen::MatrixXd history_gain(const Policy& policy, const BlockOperators& ops) {
  if (const auto* h = std::get_if<HistoryPolicy>(&policy)) {
    if (h->form == Parameterization::K) {
      ops.mask.require(h->gain, "history policy gain");
      return h->gain;
    }
    return k_from_theta(h->gain, ops);
  }
  return std::get<MemorylessPolicy>(policy).embedded(ops);
}

Eigen::VectorXd feedforward_of(const Policy& policy) {
  return std::visit([](const auto& p) -> Eigen::VectorXd { return p.feedforward; }, policy);
}

namespace {

// (I + Hu Theta) in whichever form the policy is stored, i.e. the closed-loop
// map from open-loop deviations to closed-loop deviations.
Eigen::MatrixXd deviation_map(const Policy& policy, const BlockOperators& ops) {
  const auto* h = std::get_if<HistoryPolicy>(&policy);
  if (h && h->form == Parameterization::Theta) {
    ops.mask.require(h->gain, "history policy Theta");
    return Eigen::MatrixXd::Identity(ops.lifted_dim(), ops.lifted_dim()) + ops.Hu * h->gain;
  }
  return closed_loop_inverse(history_gain(policy, ops), ops);
}

Eigen::MatrixXd theta_of(const Policy& policy, const BlockOperators& ops) {
  const auto* h = std::get_if<HistoryPolicy>(&policy);
  if (h && h->form == Parameterization::Theta) {
    ops.mask.require(h->gain, "history policy Theta");
    return h->gain;
  }
  // K-form route: K (I - Hu K)^-1 with the inverse formed explicitly.
  const Eigen::MatrixXd K = history_gain(policy, ops);
  return K * closed_loop_inverse(K, ops);
}

void require_feedforward(const Eigen::VectorXd& uff, const BlockOperators& ops) {
  if (uff.size() != ops.mask.rows()) {
    throw Error(ErrorKind::DimMismatch, "feedforward must have length n_u * N");
  }
}

}  // namespace

Eigen::VectorXd mean_trajectory(const Eigen::VectorXd& feedforward, const BlockOperators& ops,
                                const SteeringProblem& problem) {
  require_feedforward(feedforward, ops);
  return ops.Gamma * problem.init.mean() + ops.Hu * feedforward;
}

GaussianD terminal_moments(const Policy& policy, const BlockOperators& ops, const SteeringProblem& problem) {
  const Eigen::VectorXd uff = feedforward_of(policy);
  const Eigen::VectorXd mu = mean_trajectory(uff, ops, problem).tail(ops.nx);
  const Eigen::MatrixXd P = deviation_map(policy, ops).bottomRows(ops.nx);
  return GaussianD(mu, P * ops.Stilde * P.transpose());
}

std::vector<GaussianD> stage_moments(const Policy& policy, const BlockOperators& ops,
                                     const SteeringProblem& problem) {
  const Eigen::VectorXd mu = mean_trajectory(feedforward_of(policy), ops, problem);
  const Eigen::MatrixXd D = deviation_map(policy, ops);
  std::vector<GaussianD> out;
  out.reserve(static_cast<std::size_t>(ops.horizon + 1));
  for (int k = 0; k <= ops.horizon; ++k) {
    const auto rows = D.middleRows(Eigen::Index(k) * ops.nx, ops.nx);
    out.emplace_back(mu.segment(Eigen::Index(k) * ops.nx, ops.nx), rows * ops.Stilde * rows.transpose());
  }
  return out;
}

double expected_control_energy(const Policy& policy, const BlockOperators& ops) {
  const Eigen::VectorXd uff = feedforward_of(policy);
  require_feedforward(uff, ops);
  const Eigen::MatrixXd theta = theta_of(policy, ops);
  return (theta * ops.Stilde).cwiseProduct(theta).sum() + uff.squaredNorm();
}

}  // namespace covsteer
