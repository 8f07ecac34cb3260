#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "covsteer/error.hpp"
#include "covsteer/matfun.hpp"

namespace covsteer {

/// N(mean, cov). The covariance is symmetrized on construction; positive
/// definiteness is checked separately because propagated terminal
/// distributions are only guaranteed PSD.
template <typename Scalar>
class Gaussian {
 public:
  Gaussian() = default;

  Gaussian(Vector<Scalar> mean, const Matrix<Scalar>& cov) : mean_(std::move(mean)) {
    if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
      throw Error(ErrorKind::DimMismatch, "Gaussian: mean has dimension " + std::to_string(mean_.size()) +
                                              " but covariance is " + std::to_string(cov.rows()) + "x" +
                                              std::to_string(cov.cols()));
    }
    detail::require_finite(mean_, "Gaussian mean");
    detail::require_finite(cov, "Gaussian covariance");
    cov_ = symmetrize(cov);
  }

  const Vector<Scalar>& mean() const { return mean_; }
  const Matrix<Scalar>& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Vector<Scalar> mean_;
  Matrix<Scalar> cov_;
};

using GaussianD = Gaussian<double>;

template <typename Scalar>
bool is_positive_definite(const Gaussian<Scalar>& g) {
  Eigen::LLT<Matrix<Scalar>> llt(g.cov());
  return llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > Scalar(0)).all();
}

/// Throws NotPositiveDefinite naming `field` if the covariance is not PD.
template <typename Scalar>
void require_positive_definite(const Gaussian<Scalar>& g, std::string_view field) {
  if (!is_positive_definite(g)) {
    throw Error(ErrorKind::NotPositiveDefinite, std::string(field) + ": covariance is not positive definite");
  }
}

namespace detail {

template <typename Scalar>
void require_same_dim(const Gaussian<Scalar>& p, const Gaussian<Scalar>& q, const char* what) {
  if (p.dim() != q.dim()) {
    throw Error(ErrorKind::DimMismatch, std::string(what) + ": dimensions " + std::to_string(p.dim()) +
                                            " and " + std::to_string(q.dim()) + " differ");
  }
}

template <typename Scalar>
void require_psd(const Matrix<Scalar>& cov, const char* what) {
  if (cov.size() == 0) return;
  const auto eig = eig_sym(cov);
  if (eig.values.minCoeff() < -default_clamp_tol<Scalar>(eig.values)) {
    throw Error(ErrorKind::NotPsd, std::string(what) + ": covariance is indefinite");
  }
}

// Rounding can push a nonnegative functional slightly below zero.
template <typename Scalar>
Scalar clamp_nonnegative(Scalar value, Scalar scale, const char* what) {
  const Scalar slack = Scalar(1e-9) * std::max(Scalar(1), scale);
  if (value >= Scalar(0)) return value;
  if (value >= -slack) return Scalar(0);
  throw Error(ErrorKind::InternalConsistency, std::string(what) + " evaluated to " + std::to_string(value));
}

}  // namespace detail

/// Squared 2-Wasserstein distance between Gaussians:
/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2).
template <typename Scalar>
Scalar wasserstein_sq(const Gaussian<Scalar>& p, const Gaussian<Scalar>& q) {
  detail::require_same_dim(p, q, "wasserstein_sq");
  detail::require_psd(p.cov(), "wasserstein_sq: first argument");
  const Matrix<Scalar> root_q = sqrtm_psd(q.cov());
  const Matrix<Scalar> cross = sqrtm_psd(root_q * p.cov() * root_q);
  const Scalar value = (p.mean() - q.mean()).squaredNorm() + p.cov().trace() + q.cov().trace() -
                       Scalar(2) * cross.trace();
  return detail::clamp_nonnegative(value, p.cov().trace() + q.cov().trace(), "wasserstein_sq");
}

/// KL(p || q) for Gaussians.
template <typename Scalar>
Scalar kl_divergence(const Gaussian<Scalar>& p, const Gaussian<Scalar>& q) {
  detail::require_same_dim(p, q, "kl_divergence");
  require_positive_definite(p, "kl_divergence: first argument");
  Eigen::LLT<Matrix<Scalar>> q_llt(q.cov());
  if (q_llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "kl_divergence: second argument covariance is not positive definite");
  }
  const Vector<Scalar> diff = q.mean() - p.mean();
  const Scalar trace_term = q_llt.solve(p.cov()).trace();
  const Scalar mahalanobis = diff.dot(q_llt.solve(diff));
  const Scalar value = Scalar(0.5) * (trace_term + mahalanobis - Scalar(p.dim()) + logdet_pd(q.cov()) -
                                      logdet_pd(p.cov()));
  return detail::clamp_nonnegative(value, Scalar(p.dim()), "kl_divergence");
}

/// Closed polyline on {x : (x - mu)^T S^-1 (x - mu) = n_sigma^2}. The last
/// point repeats the first, so the result has n_points entries describing
/// n_points - 1 segments.
template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, 2, 1>> confidence_ellipse(const Gaussian<Scalar>& g, Scalar n_sigma,
                                                            int n_points = 128) {
  if (g.dim() != 2) {
    throw Error(ErrorKind::DimMismatch, "confidence_ellipse: needs a 2-D Gaussian, got dimension " +
                                            std::to_string(g.dim()));
  }
  if (!(n_sigma > Scalar(0))) throw Error(ErrorKind::InvalidInput, "confidence_ellipse: n_sigma must be positive");
  if (n_points < 3) throw Error(ErrorKind::InvalidInput, "confidence_ellipse: need at least 3 points");

  const auto eig = eig_sym(g.cov());
  if (eig.values.minCoeff() <= Scalar(0)) {
    throw Error(ErrorKind::NotPositiveDefinite, "confidence_ellipse: covariance is not positive definite");
  }
  const Eigen::Matrix<Scalar, 2, 1> axis0 = eig.vectors.col(0) * (n_sigma * std::sqrt(eig.values(0)));
  const Eigen::Matrix<Scalar, 2, 1> axis1 = eig.vectors.col(1) * (n_sigma * std::sqrt(eig.values(1)));
  const Eigen::Matrix<Scalar, 2, 1> center = g.mean();

  std::vector<Eigen::Matrix<Scalar, 2, 1>> points;
  points.reserve(static_cast<std::size_t>(n_points));
  const int segments = n_points - 1;
  for (int i = 0; i < segments; ++i) {
    const Scalar t = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(i) / Scalar(segments);
    points.push_back(center + std::cos(t) * axis0 + std::sin(t) * axis1);
  }
  points.push_back(points.front());
  return points;
}

}  // namespace covsteer
