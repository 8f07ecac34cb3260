#include "covsteer/ccp.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "covsteer/matfun.hpp"

namespace covsteer {

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& S, double tol) {
  const Eigen::Index n = S.rows();
  const double scale = n ? S.diagonal().cwiseAbs().maxCoeff() : 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() == Eigen::Success && n && llt.matrixLLT().diagonal().minCoeff() > std::sqrt(tol * scale)) {
    return llt.matrixL();
  }
  // Unpivoted outer-product Cholesky that drops vanishing pivots. For a PSD
  // matrix a zero pivot implies a zero column below it.
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = S(j, j) - L.row(j).head(j).squaredNorm();
    if (d <= tol * scale) continue;
    if (d < -1e-8 * scale) throw Error(ErrorKind::NotPsd, "semidefinite_cholesky: matrix is indefinite");
    L(j, j) = std::sqrt(d);
    const Eigen::Index rest = n - j - 1;
    L.col(j).tail(rest) =
        (S.col(j).tail(rest) - L.bottomLeftCorner(rest, j) * L.row(j).head(j).transpose()) / L(j, j);
  }
  return L;
}

DcObjective::DcObjective(SteeringProblem problem, BlockOperators ops)
    : problem_(std::move(problem)), ops_(std::move(ops)) {
  problem_.validate();
  goal_sqrt_ = sqrtm_psd(problem_.goal.cov());
  factor_ = semidefinite_cholesky(ops_.Stilde);
  dead_column_.resize(static_cast<std::size_t>(factor_.cols()));
  for (Eigen::Index j = 0; j < factor_.cols(); ++j) dead_column_[static_cast<std::size_t>(j)] = factor_(j, j) == 0.0;
  terminal_input_ = ops_.terminal_input_map();
  terminal_factor_ = factor_.bottomRows(ops_.nx);
}

Eigen::MatrixXd DcObjective::whiten(const Eigen::MatrixXd& theta) const {
  ops_.mask.require(theta, "whiten");
  return theta * factor_.triangularView<Eigen::Lower>();
}

Eigen::MatrixXd DcObjective::unwhiten(const Eigen::MatrixXd& psi) const {
  // Theta L = Psi, solved right to left over columns.
  const Eigen::Index m = factor_.cols();
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(psi.rows(), m);
  for (Eigen::Index j = m - 1; j >= 0; --j) {
    if (dead_column_[static_cast<std::size_t>(j)]) continue;
    const Eigen::Index rest = m - j - 1;
    theta.col(j) = (psi.col(j) - theta.rightCols(rest) * factor_.col(j).tail(rest)) / factor_(j, j);
  }
  return ops_.mask.project(theta);
}

Eigen::MatrixXd DcObjective::whitened_terminal(const Eigen::MatrixXd& psi) const {
  return terminal_factor_ + terminal_input_ * psi;
}

double DcObjective::whitened_covariance_part(const Eigen::MatrixXd& psi) const {
  const double lambda = problem_.lambda;
  const Eigen::MatrixXd T = whitened_terminal(psi);
  const double j2 = psi.squaredNorm();
  const double j3 = lambda * (T.squaredNorm() + problem_.goal.cov().trace());
  const double j4 = 2.0 * lambda * nuclear_norm(goal_sqrt_ * T);
  return j2 + j3 - j4;
}

Eigen::MatrixXd DcObjective::whitened_j4_subgradient(const Eigen::MatrixXd& psi) const {
  const Eigen::MatrixXd Q = nuclear_norm_subgradient(Eigen::MatrixXd(goal_sqrt_ * whitened_terminal(psi)));
  Eigen::MatrixXd G = ops_.mask.project(2.0 * problem_.lambda * terminal_input_.transpose() * goal_sqrt_ * Q);
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    if (dead_column_[static_cast<std::size_t>(j)]) G.col(j).setZero();
  return G;
}

DcTerms DcObjective::eval_terms(const Eigen::VectorXd& uff, const Eigen::MatrixXd& theta) const {
  ops_.mask.require(theta, "eval_terms");
  if (uff.size() != ops_.mask.rows()) throw Error(ErrorKind::DimMismatch, "eval_terms: feedforward length");
  const double lambda = problem_.lambda;
  const Eigen::VectorXd mean_gap =
      ops_.Gamma.bottomRows(ops_.nx) * problem_.init.mean() + terminal_input_ * uff - problem_.goal.mean();
  const Eigen::MatrixXd psi = whiten(theta);
  const Eigen::MatrixXd T = whitened_terminal(psi);

  DcTerms t;
  t.j1 = uff.squaredNorm() + lambda * mean_gap.squaredNorm();
  t.j2 = psi.squaredNorm();
  t.j3 = lambda * (T.squaredNorm() + problem_.goal.cov().trace());
  t.j4 = 2.0 * lambda * nuclear_norm(goal_sqrt_ * T);
  return t;
}

double DcObjective::covariance_part(const Eigen::MatrixXd& theta) const {
  return whitened_covariance_part(whiten(theta));
}

Eigen::MatrixXd DcObjective::g(const Eigen::MatrixXd& theta) const {
  ops_.mask.require(theta, "g");
  const Eigen::MatrixXd P = ops_.F + terminal_input_ * theta;
  return (goal_sqrt_ * P * factor_).transpose();
}

Eigen::MatrixXd DcObjective::j4_subgradient(const Eigen::MatrixXd& theta) const {
  const Eigen::MatrixXd G_psi = whitened_j4_subgradient(whiten(theta));
  return ops_.mask.project(G_psi * factor_.transpose());
}

Eigen::MatrixXd DcObjective::convex_gradient(const Eigen::MatrixXd& theta) const {
  ops_.mask.require(theta, "convex_gradient");
  const Eigen::MatrixXd P = ops_.F + terminal_input_ * theta;
  return ops_.mask.project(2.0 * theta * ops_.Stilde +
                           2.0 * problem_.lambda * terminal_input_.transpose() * (P * ops_.Stilde));
}

Eigen::VectorXd solve_mean_subproblem(const DcObjective& obj) {
  const auto& ops = obj.ops();
  const auto& problem = obj.problem();
  const Eigen::MatrixXd& W = obj.terminal_input_map();
  const Eigen::VectorXd open_loop = ops.Gamma.bottomRows(ops.nx) * problem.init.mean();
  const Eigen::MatrixXd normal =
      Eigen::MatrixXd::Identity(W.cols(), W.cols()) + problem.lambda * W.transpose() * W;
  return normal.llt().solve(problem.lambda * W.transpose() * (problem.goal.mean() - open_loop));
}

double surrogate_value(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& subgradient,
                       const Eigen::MatrixXd& theta_i, const DcObjective& obj) {
  const auto& ops = obj.ops();
  ops.mask.require(theta, "surrogate_value theta");
  ops.mask.require(theta_i, "surrogate_value theta_i");
  ops.mask.require(subgradient, "surrogate_value subgradient");
  const double lambda = obj.problem().lambda;
  const Eigen::MatrixXd P = ops.F + obj.terminal_input_map() * theta;
  const double j2 = (theta * ops.Stilde).cwiseProduct(theta).sum();
  const double j3 = lambda * ((P * ops.Stilde).cwiseProduct(P).sum() + obj.problem().goal.cov().trace());
  const DcTerms at_i = obj.eval_terms(Eigen::VectorXd::Zero(ops.mask.rows()), theta_i);
  return j2 + j3 - at_i.j4 - subgradient.cwiseProduct(theta - theta_i).sum();
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct InnerSolve {
  Eigen::MatrixXd psi;
  double residual = 0.0;  // |masked surrogate gradient in Theta coordinates|_F
};

// Minimizes |Psi|^2 + lambda |F L + W Psi|^2 - <G, Psi> over masked Psi. The
// objective separates over columns; column j only involves the rows admitted
// by the mask, and its Hessian 2I + 2 lambda W_R^T W_R is the identity plus a
// rank <= n_x term, so CG terminates in at most n_x + 1 steps.
InnerSolve solve_surrogate(const DcObjective& obj, const Eigen::MatrixXd& G, const Eigen::MatrixXd& warm,
                           const CcpSettings& settings, double theta_scale) {
  const auto& ops = obj.ops();
  const double lambda = obj.problem().lambda;
  const Eigen::MatrixXd& W = obj.terminal_input_map();
  const Eigen::MatrixXd FL = obj.stilde_factor().bottomRows(ops.nx);
  const Eigen::MatrixXd& L = obj.stilde_factor();
  const Eigen::Index rows = ops.mask.rows();
  const Eigen::Index cols = ops.mask.cols();

  // Per-column residual target that bounds the Theta-space residual
  // |P(R_psi L^T)|_F <= |R_psi|_F |L|_F by the requested tolerance.
  const double target = settings.inner_tol * theta_scale /
                        (2.0 * std::sqrt(double(std::max<Eigen::Index>(cols, 1))) * std::max(L.norm(), 1e-300));

  Eigen::MatrixXd psi = warm;
  Eigen::MatrixXd R_psi = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const Eigen::Index r0 = ops.mask.first_row(j);
    const Eigen::Index n = rows - r0;
    if (n == 0 || L(j, j) == 0.0) {
      psi.col(j).setZero();
      continue;
    }
    const auto WR = W.rightCols(n);
    auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return 2.0 * v + 2.0 * lambda * (WR.transpose() * (WR * v));
    };
    const Eigen::VectorXd b = G.col(j).tail(n) - 2.0 * lambda * WR.transpose() * FL.col(j);
    Eigen::VectorXd x = psi.col(j).tail(n);
    Eigen::VectorXd r = b - apply(x);
    Eigen::VectorXd p = r;
    double rr = r.squaredNorm();
    for (int it = 0; it < settings.inner_max_iters && std::sqrt(rr) > target; ++it) {
      const Eigen::VectorXd q = apply(p);
      const double alpha = rr / p.dot(q);
      x += alpha * p;
      r -= alpha * q;
      const double rr_next = r.squaredNorm();
      p = r + (rr_next / rr) * p;
      rr = rr_next;
    }
    // Recompute the true residual rather than trusting the recursion.
    psi.col(j).tail(n) = x;
    psi.col(j).head(r0).setZero();
    R_psi.col(j).tail(n) = b - apply(x);
  }
  return {psi, ops.mask.project(R_psi * L.transpose()).norm()};
}

}  // namespace

SolveReport ccp_minimize(const DcObjective& obj, const CcpSettings& settings,
                         const std::optional<HistoryPolicy>& init) {
  if (!(settings.epsilon > 0.0) || !(settings.inner_tol > 0.0) || settings.max_iters <= 0 ||
      settings.inner_max_iters <= 0) {
    throw Error(ErrorKind::InvalidInput, "ccp_minimize: settings must be positive");
  }
  const auto start = Clock::now();
  const auto& ops = obj.ops();

  const Eigen::VectorXd uff = solve_mean_subproblem(obj);
  const double j1 = obj.eval_terms(uff, Eigen::MatrixXd::Zero(ops.mask.rows(), ops.mask.cols())).j1;

  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(ops.mask.rows(), ops.mask.cols());
  if (init) {
    const Eigen::MatrixXd theta0 =
        init->form == Parameterization::Theta ? init->gain : theta_from_k(init->gain, ops);
    psi = obj.whiten(theta0);
  }

  SolveReport report;
  double f = j1 + obj.whitened_covariance_part(psi);
  report.objective_trace.push_back(f);
  report.trace_wall_ms.push_back(elapsed_ms(start));
  report.termination = Termination::MaxIters;

  for (int it = 1; it <= settings.max_iters; ++it) {
    const Eigen::MatrixXd G = obj.whitened_j4_subgradient(psi);
    const double theta_scale = 1.0 + ops.mask.project(G * obj.stilde_factor().transpose()).norm();
    InnerSolve inner = solve_surrogate(obj, G, psi, settings, theta_scale);
    if (!(inner.residual <= settings.inner_tol * theta_scale)) {
      throw Error(ErrorKind::InnerSolveFailed, "ccp_minimize: inner CG stopped at residual " +
                                                   std::to_string(inner.residual) + " (iteration " +
                                                   std::to_string(it) + ")");
    }
    psi = std::move(inner.psi);
    const double f_next = j1 + obj.whitened_covariance_part(psi);
    report.objective_trace.push_back(f_next);
    report.trace_wall_ms.push_back(elapsed_ms(start));
    report.iterations = it;
    const double rel = std::abs(f - f_next) / std::max(std::abs(f_next), 1.0);
    f = f_next;
    if (rel <= settings.epsilon) {
      report.termination = Termination::Converged;
      break;
    }
  }

  const Eigen::MatrixXd theta = obj.unwhiten(psi);
  HistoryPolicy theta_policy{theta, uff, Parameterization::Theta};
  report.k_policy = HistoryPolicy{k_from_theta(theta, ops), uff, Parameterization::K};
  report.terminal = terminal_moments(theta_policy, ops, obj.problem());
  report.policy = std::move(theta_policy);
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace covsteer
