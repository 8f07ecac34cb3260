#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "covsteer/solve_report.hpp"

namespace covsteer {

struct QuasiNewtonSettings {
  int memory = 10;
  double grad_tol = 1e-6;    // on |grad|_inf
  double rel_f_tol = 1e-9;   // (f_prev - f) / max(|f_prev|, |f|, 1)
  int max_iters = 500;
  double c1 = 1e-4;          // sufficient decrease
  double c2 = 0.9;           // curvature
  int max_line_search = 60;

  void validate() const;
};

/// Returns f(x) and writes its gradient into `grad`. Points outside the
/// domain must return +infinity; `grad` is then ignored.
using GradientObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct QnResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  Termination termination = Termination::MaxIters;
  std::vector<double> trace;          // f at x0, then after every iteration
  std::vector<double> trace_wall_ms;
};

/// Limited-memory BFGS with a strong-Wolfe line search. Throws
/// LineSearchFailed if no acceptable step exists even along -grad.
QnResult lbfgs_minimize(const GradientObjective& objective, Eigen::VectorXd x0,
                        const QuasiNewtonSettings& settings = {});

}  // namespace covsteer
