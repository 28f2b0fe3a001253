#pragma once

#include <algorithm>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "swba/linalg/dense.hpp"

namespace swba {

/// Compact SVD A = U1 diag(d1) V1^T keeping singular values > rank_tol * sigma_max.
template <typename Scalar>
struct CompactSvd {
  MatX<Scalar> u1;
  VecX<Scalar> d1;
  MatX<Scalar> v1;
  Index rank = 0;
};

template <typename Derived, typename Scalar = typename Derived::Scalar>
CompactSvd<Scalar> compact_svd(const Eigen::MatrixBase<Derived>& a,
                               Scalar rank_tol) {
  require_finite(a, "compact_svd");
  CompactSvd<Scalar> out;
  if (a.rows() == 0 || a.cols() == 0) {
    out.u1.resize(a.rows(), 0);
    out.v1.resize(a.cols(), 0);
    return out;
  }
  Eigen::JacobiSVD<MatX<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX<Scalar>& s = svd.singularValues();
  const Scalar cutoff = rank_tol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) > cutoff && s(r) > Scalar(0)) ++r;
  out.rank = r;
  out.u1 = svd.matrixU().leftCols(r);
  out.d1 = s.head(r);
  out.v1 = svd.matrixV().leftCols(r);
  return out;
}

/// Relative rank tolerance comparable with the flat QR default.
template <typename Scalar>
Scalar default_rank_tolerance(Index rows, Index cols) {
  return static_cast<Scalar>(kDefaultZeroTolFactor) * machine_epsilon<Scalar>() *
         static_cast<Scalar>(std::max<Index>(1, std::max(rows, cols)));
}

template <typename Derived, typename Scalar = typename Derived::Scalar>
Index svd_rank(const Eigen::MatrixBase<Derived>& a, Scalar rank_tol) {
  return compact_svd(a, rank_tol).rank;
}

/// Moore-Penrose inverse V1 D1^{-1} U1^T.
template <typename Derived, typename Scalar = typename Derived::Scalar>
MatX<Scalar> svd_pseudo_inverse(const Eigen::MatrixBase<Derived>& a,
                                Scalar rank_tol) {
  const CompactSvd<Scalar> c = compact_svd(a, rank_tol);
  return c.v1 * c.d1.cwiseInverse().asDiagonal() * c.u1.transpose();
}

template <typename Derived, typename Scalar = typename Derived::Scalar>
MatX<Scalar> svd_pseudo_inverse(const Eigen::MatrixBase<Derived>& a) {
  return svd_pseudo_inverse(a, default_rank_tolerance<Scalar>(a.rows(), a.cols()));
}

/// Smallest eigenvalue of the symmetrized input, always computed in double.
template <typename Derived>
double min_eigenvalue(const Eigen::MatrixBase<Derived>& h) {
  if (h.rows() != h.cols()) throw Error("min_eigenvalue: matrix must be square");
  require_finite(h, "min_eigenvalue");
  if (h.rows() == 0) throw Error("min_eigenvalue: empty matrix");
  const MatXd hd = h.template cast<double>();
  const MatXd sym = 0.5 * (hd + hd.transpose());
  Eigen::SelfAdjointEigenSolver<MatXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace swba
