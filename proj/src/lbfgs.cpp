#include "covsteer/lbfgs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>

#include "covsteer/error.hpp"

namespace covsteer {

void QuasiNewtonSettings::validate() const {
  if (memory <= 0 || max_iters <= 0 || max_line_search <= 0) {
    throw Error(ErrorKind::InvalidInput, "QuasiNewtonSettings: counts must be positive");
  }
  if (!(grad_tol > 0.0) || !(rel_f_tol >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "QuasiNewtonSettings: tolerances must be positive");
  }
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) {
    throw Error(ErrorKind::InvalidInput, "QuasiNewtonSettings: need 0 < c1 < c2 < 1");
  }
}

namespace {

struct Trial {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineSearch {
 public:
  LineSearch(const GradientObjective& objective, const QuasiNewtonSettings& settings, const Eigen::VectorXd& x,
             double f0, const Eigen::VectorXd& dir, double slope0)
      : objective_(objective), settings_(settings), x_(x), f0_(f0), dir_(dir), slope0_(slope0) {}

  // Nocedal & Wright, Algorithms 3.5 / 3.6. Falls back to the best point with
  // sufficient decrease if the curvature condition cannot be met.
  std::optional<Trial> run(double step) {
    Trial prev{0.0, f0_, slope0_, x_, {}};
    for (int i = 0; i < settings_.max_line_search; ++i) {
      Trial t = evaluate(step);
      if (!std::isfinite(t.f) || !armijo(t) || (i > 0 && t.f >= prev.f)) return zoom(prev, t);
      if (std::abs(t.slope) <= -settings_.c2 * slope0_) return t;
      if (t.slope >= 0.0) return zoom(t, prev);
      prev = std::move(t);
      step *= 2.0;
    }
    return best_;
  }

  int evaluations() const { return evaluations_; }

  // Largest decrease promised by the quadratic through f0, slope0 and the
  // first finite trial; infinite if nothing finite was seen.
  double model_decrease() const {
    if (!first_) return std::numeric_limits<double>::infinity();
    const double s = first_->step;
    const double curvature = 2.0 * (first_->f - f0_ - slope0_ * s) / (s * s);
    if (!(curvature > 0.0)) return -slope0_ * s;
    return slope0_ * slope0_ / (2.0 * curvature);
  }

 private:
  Trial evaluate(double step) {
    ++evaluations_;
    Trial t;
    t.step = step;
    t.x = x_ + step * dir_;
    t.grad.resize(x_.size());
    t.f = objective_(t.x, t.grad);
    if (!std::isfinite(t.f)) {
      t.f = std::numeric_limits<double>::infinity();
      return t;
    }
    t.slope = t.grad.dot(dir_);
    if (!first_) first_ = Trial{t.step, t.f, t.slope, {}, {}};
    if (armijo(t) && t.f < f0_ && (!best_ || t.f < best_->f)) best_ = t;
    return t;
  }

  bool armijo(const Trial& t) const { return t.f <= f0_ + settings_.c1 * t.step * slope0_; }

  std::optional<Trial> zoom(Trial lo, Trial hi) {
    for (int i = 0; i < settings_.max_line_search; ++i) {
      const double width = hi.step - lo.step;
      if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      double step = lo.step + 0.5 * width;
      if (std::isfinite(hi.f)) {
        // Quadratic through f(lo), f'(lo), f(hi), safeguarded to the interior.
        const double denom = 2.0 * (hi.f - lo.f - lo.slope * width);
        if (denom > 0.0) {
          const double q = lo.step - lo.slope * width * width / denom;
          const double a = std::min(lo.step, hi.step) + 0.1 * std::abs(width);
          const double b = std::max(lo.step, hi.step) - 0.1 * std::abs(width);
          if (std::isfinite(q)) step = std::clamp(q, a, b);
        }
      }
      Trial t = evaluate(step);
      if (!std::isfinite(t.f) || !armijo(t) || t.f >= lo.f) {
        hi = std::move(t);
        continue;
      }
      if (std::abs(t.slope) <= -settings_.c2 * slope0_) return t;
      if (t.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(t);
    }
    return best_;
  }

  const GradientObjective& objective_;
  const QuasiNewtonSettings& settings_;
  const Eigen::VectorXd& x_;
  double f0_;
  const Eigen::VectorXd& dir_;
  double slope0_;
  std::optional<Trial> best_;
  std::optional<Trial> first_;
  int evaluations_ = 0;
};

struct Pair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

Eigen::VectorXd two_loop(const std::deque<Pair>& memory, const Eigen::VectorXd& grad) {
  Eigen::VectorXd q = grad;
  std::vector<double> alpha(memory.size());
  for (std::size_t i = memory.size(); i-- > 0;) {
    alpha[i] = memory[i].rho * memory[i].s.dot(q);
    q -= alpha[i] * memory[i].y;
  }
  if (!memory.empty()) {
    const Pair& last = memory.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const double beta = memory[i].rho * memory[i].y.dot(q);
    q += (alpha[i] - beta) * memory[i].s;
  }
  return -q;
}

}  // namespace

QnResult lbfgs_minimize(const GradientObjective& objective, Eigen::VectorXd x0, const QuasiNewtonSettings& settings) {
  settings.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - start).count(); };

  QnResult res;
  res.x = std::move(x0);
  res.grad.resize(res.x.size());
  res.f = objective(res.x, res.grad);
  if (!std::isfinite(res.f)) {
    throw Error(ErrorKind::InvalidInput, "lbfgs_minimize: objective is not finite at the initial point");
  }
  res.trace.push_back(res.f);
  res.trace_wall_ms.push_back(elapsed_ms());

  std::deque<Pair> memory;
  for (int it = 0;; ++it) {
    if (res.grad.size() == 0 || res.grad.cwiseAbs().maxCoeff() <= settings.grad_tol) {
      res.termination = Termination::GradTol;
      return res;
    }
    if (it >= settings.max_iters) {
      res.termination = Termination::MaxIters;
      return res;
    }

    std::optional<Trial> step;
    double predicted_decrease = 0.0;
    for (int attempt = 0; attempt < 2 && !step; ++attempt) {
      Eigen::VectorXd dir = two_loop(memory, res.grad);
      double slope = dir.dot(res.grad);
      if (!(slope < 0.0)) {
        memory.clear();
        dir = -res.grad;
        slope = -res.grad.squaredNorm();
      }
      const double initial = memory.empty() ? std::min(1.0, 1.0 / res.grad.norm()) : 1.0;
      LineSearch search(objective, settings, res.x, res.f, dir, slope);
      step = search.run(initial);
      if (!step) {
        predicted_decrease = std::max(predicted_decrease, search.model_decrease());
        memory.clear();
      }
    }
    // No trial decreased f, but the local model says the best possible
    // decrease would already pass the relative-f test: f has hit its noise floor.
    if (!step && predicted_decrease <= std::max(settings.rel_f_tol, 1e-12) * std::max(1.0, std::abs(res.f))) {
      res.termination = Termination::RelFTol;
      return res;
    }
    if (!step) {
      throw Error(ErrorKind::LineSearchFailed, "lbfgs_minimize: no acceptable step at iteration " +
                                                   std::to_string(it) + " (f = " + std::to_string(res.f) +
                                                   ", |grad|_inf = " +
                                                   std::to_string(res.grad.cwiseAbs().maxCoeff()) + ")");
    }

    Pair pair{step->x - res.x, step->grad - res.grad, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > settings.memory) memory.pop_front();
    }

    const double f_prev = res.f;
    res.x = std::move(step->x);
    res.grad = std::move(step->grad);
    res.f = step->f;
    res.iterations = it + 1;
    res.trace.push_back(res.f);
    res.trace_wall_ms.push_back(elapsed_ms());

    if ((f_prev - res.f) / std::max({std::abs(f_prev), std::abs(res.f), 1.0}) <= settings.rel_f_tol) {
      res.termination = Termination::RelFTol;
      return res;
    }
  }
}

}  // namespace covsteer
