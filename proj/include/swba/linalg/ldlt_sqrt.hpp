#pragma once

#include <algorithm>
#include <cmath>

#include "swba/linalg/dense.hpp"

namespace swba {

template <typename Scalar>
struct LdltSqrtResult {
  /// R = D^{1/2} L^T restricted to the rows with positive pivots.
  MatX<Scalar> r;
  Index rank = 0;
  /// Pivots below -tolerance (clamped to zero and dropped).
  Index negative_pivots = 0;
  /// Most negative pivot seen, 0 if none was negative.
  double most_negative_pivot = 0.0;
  Scalar tolerance_used = 0;

  bool definiteness_warning() const { return negative_pivots > 0; }
};

/// Unpivoted LDL^T of a symmetric positive semi-definite matrix, returned as
/// the square root R with R^T R = h. Pivots <= tol are dropped; pivots below
/// -tol are counted as a definiteness warning and clamped to zero.
template <typename Derived, typename Scalar = typename Derived::Scalar>
LdltSqrtResult<Scalar> ldlt_sqrt_factor(const Eigen::MatrixBase<Derived>& h,
                                        Scalar tol) {
  if (h.rows() != h.cols()) throw Error("ldlt_sqrt: matrix must be square");
  require_finite(h, "ldlt_sqrt");
  const Index n = h.rows();
  LdltSqrtResult<Scalar> out;
  out.tolerance_used = tol;
  if (n == 0) {
    out.r.resize(0, 0);
    return out;
  }
  const Scalar asym = (h - h.transpose()).norm();
  if (asym > default_zero_tolerance(h)) {
    throw Error("ldlt_sqrt: matrix is not symmetric (||H - H^T||_F = " +
                std::to_string(static_cast<double>(asym)) + ")");
  }

  // a holds the trailing Schur complement in its lower triangle.
  MatX<Scalar> a = (h + h.transpose()) * Scalar(0.5);
  MatX<Scalar> r = MatX<Scalar>::Zero(n, n);
  Index rows = 0;
  for (Index k = 0; k < n; ++k) {
    const Scalar d = a(k, k);
    if (d <= tol) {
      if (d < -tol) {
        ++out.negative_pivots;
        out.most_negative_pivot =
            std::min(out.most_negative_pivot, static_cast<double>(d));
      }
      continue;
    }
    const Index m = n - k - 1;
    const Scalar s = std::sqrt(d);
    r(rows, k) = s;
    if (m > 0) {
      VecX<Scalar> l = a.col(k).tail(m) / d;
      r.row(rows).tail(m) = (s * l).transpose();
      a.bottomRightCorner(m, m).template triangularView<Eigen::Lower>() -=
          d * l * l.transpose();
    }
    ++rows;
  }
  out.rank = rows;
  out.r = r.topRows(rows);
  return out;
}

template <typename Derived, typename Scalar = typename Derived::Scalar>
LdltSqrtResult<Scalar> ldlt_sqrt_factor(const Eigen::MatrixBase<Derived>& h) {
  return ldlt_sqrt_factor(h, default_zero_tolerance(h));
}

template <typename Derived, typename Scalar = typename Derived::Scalar>
MatX<Scalar> ldlt_sqrt(const Eigen::MatrixBase<Derived>& h) {
  return ldlt_sqrt_factor(h).r;
}

}  // namespace swba
