#pragma once

// Dense symmetric / PSD matrix functions and norms.
//
// Every function taking a symmetric argument symmetrizes it as (M + M^T)/2
// first, so callers may pass the result of an expression that is symmetric
// only up to rounding.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "covsteer/error.hpp"

namespace covsteer {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct EigDecomposition {
  Vector<Scalar> values;   // descending
  Matrix<Scalar> vectors;  // columns are eigenvectors

  Matrix<Scalar> reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
  }
};

template <typename Scalar>
struct Svd {
  Matrix<Scalar> left;
  Vector<Scalar> singular_values;  // descending, nonnegative
  Matrix<Scalar> right;

  Matrix<Scalar> reconstruct() const {
    return left * singular_values.asDiagonal() * right.transpose();
  }
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite entries");
  }
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::DimMismatch, std::string(what) + ": matrix is not square");
  }
}

}  // namespace detail

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  detail::require_square(m, "symmetrize");
  Matrix<typename Derived::Scalar> s = m;
  return (s + s.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
EigDecomposition<typename Derived::Scalar> eig_sym(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "eig_sym");
  detail::require_finite(m, "eig_sym");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(symmetrize(m));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidInput, "eig_sym: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  return {solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
}

/// Default clamp tolerance for sqrtm_psd: relative to the spectral radius.
template <typename Scalar>
Scalar default_clamp_tol(const Vector<Scalar>& eigenvalues) {
  const Scalar scale = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : Scalar(0);
  return Scalar(1e-10) * scale;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> sqrtm_from_eig(const EigDecomposition<Scalar>& eig, Scalar clamp_tol) {
  if (eig.values.size() && eig.values.minCoeff() < -clamp_tol) {
    throw Error(ErrorKind::NotPsd, "sqrtm_psd: eigenvalue " + std::to_string(eig.values.minCoeff()) +
                                       " below -" + std::to_string(clamp_tol));
  }
  const Vector<Scalar> roots = eig.values.cwiseMax(Scalar(0)).cwiseSqrt();
  return symmetrize(eig.vectors * roots.asDiagonal() * eig.vectors.transpose());
}

}  // namespace detail

/// Principal square root of a PSD matrix. Eigenvalues in [-clamp_tol, 0) are
/// treated as zero; anything more negative raises NotPsd.
template <typename Derived>
Matrix<typename Derived::Scalar> sqrtm_psd(const Eigen::MatrixBase<Derived>& m,
                                           typename Derived::Scalar clamp_tol) {
  return detail::sqrtm_from_eig(eig_sym(m), clamp_tol);
}

template <typename Derived>
Matrix<typename Derived::Scalar> sqrtm_psd(const Eigen::MatrixBase<Derived>& m) {
  const auto eig = eig_sym(m);
  return detail::sqrtm_from_eig(eig, default_clamp_tol(eig.values));
}

/// Thin SVD with singular values in descending order.
template <typename Derived>
Svd<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(a, "svd");
  Eigen::JacobiSVD<Matrix<Scalar>> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(a, "nuclear_norm");
  if (a.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<Matrix<Scalar>> solver(a);
  return solver.singularValues().sum();
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> truncated_polar(const Svd<Scalar>& dec, Scalar rank_tol, Eigen::Index rows,
                               Eigen::Index cols) {
  Matrix<Scalar> g = Matrix<Scalar>::Zero(rows, cols);
  for (Eigen::Index i = 0; i < dec.singular_values.size(); ++i) {
    if (dec.singular_values(i) > rank_tol) {
      g.noalias() += dec.left.col(i) * dec.right.col(i).transpose();
    }
  }
  return g;
}

}  // namespace detail

/// U1 V1^T over the singular triplets with sigma > rank_tol. This is the
/// gradient of the nuclear norm where it is differentiable and a valid
/// subgradient everywhere else.
template <typename Derived>
Matrix<typename Derived::Scalar> nuclear_norm_subgradient(const Eigen::MatrixBase<Derived>& a,
                                                          typename Derived::Scalar rank_tol) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Matrix<Scalar>::Zero(a.rows(), a.cols());
  return detail::truncated_polar(svd(a), rank_tol, a.rows(), a.cols());
}

/// Same, with rank_tol = 1e-9 * sigma_max.
template <typename Derived>
Matrix<typename Derived::Scalar> nuclear_norm_subgradient(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return Matrix<Scalar>::Zero(a.rows(), a.cols());
  const auto dec = svd(a);
  return detail::truncated_polar(dec, Scalar(1e-9) * dec.singular_values(0), a.rows(), a.cols());
}

/// log det of a symmetric positive definite matrix via Cholesky.
template <typename Derived>
typename Derived::Scalar logdet_pd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_square(m, "logdet_pd");
  detail::require_finite(m, "logdet_pd");
  Eigen::LLT<Matrix<Scalar>> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "logdet_pd: matrix is not positive definite");
  }
  const auto diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= Scalar(0)).any()) {
    throw Error(ErrorKind::NotPositiveDefinite, "logdet_pd: matrix is not positive definite");
  }
  return Scalar(2) * diag.array().log().sum();
}

}  // namespace covsteer
