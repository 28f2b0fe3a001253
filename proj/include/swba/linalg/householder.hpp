#pragma once

#include <cmath>
#include <vector>

#include "swba/linalg/dense.hpp"

namespace swba {

/// Elementary reflector P = I - beta * v * v^T acting on rows [row, row + v.size()).
/// v(0) is always 1.
template <typename Scalar>
struct HouseholderReflector {
  Index row = 0;
  VecX<Scalar> v;
  Scalar beta = 0;

  template <typename Derived>
  void apply(Eigen::MatrixBase<Derived>& m) const {
    if (beta == Scalar(0)) return;
    auto rows = m.derived().middleRows(row, v.size());
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> w = v.transpose() * rows;
    rows.noalias() -= (beta * v) * w;
  }
};

template <typename Scalar>
struct FlatQrResult {
  /// Flat upper-trapezoidal factor; rows are the nonzero rows of Q^T A.
  MatX<Scalar> r_factor;
  std::vector<HouseholderReflector<Scalar>> householder_data;
  Index total_rank = 0;
  Index mu_rank = 0;
  Scalar zero_tolerance_used = 0;
  /// Column of the leading (Householder) element of each row of r_factor.
  std::vector<Index> leading_columns;

  /// m <- Q^T m. m must have as many rows as the factored input.
  template <typename Derived>
  void apply_qt(Eigen::MatrixBase<Derived>& m) const {
    for (const auto& h : householder_data) h.apply(m);
  }

  /// m <- Q m (reflectors in reverse order).
  template <typename Derived>
  void apply_q(Eigen::MatrixBase<Derived>& m) const {
    for (auto it = householder_data.rbegin(); it != householder_data.rend();
         ++it) {
      it->apply(m);
    }
  }
};

namespace detail {

/// Computes v (v(0) = 1) and beta with (I - beta v v^T) x = ||x|| e_1.
/// Returns ||x||.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar make_householder(const Eigen::MatrixBase<Derived>& x, VecX<Scalar>& v,
                        Scalar& beta) {
  const Index n = x.size();
  v.resize(n);
  v(0) = Scalar(1);
  const Scalar x0 = x(0);
  const Scalar sigma = n > 1 ? x.tail(n - 1).squaredNorm() : Scalar(0);
  if (n > 1) v.tail(n - 1) = x.tail(n - 1);

  if (sigma == Scalar(0)) {
    beta = x0 >= Scalar(0) ? Scalar(0) : Scalar(2);
    return std::abs(x0);
  }
  const Scalar mu = std::sqrt(x0 * x0 + sigma);
  const Scalar v0 = x0 <= Scalar(0) ? x0 - mu : -sigma / (x0 + mu);
  beta = Scalar(2) * v0 * v0 / (sigma + v0 * v0);
  v.tail(n - 1) /= v0;
  return mu;
}

}  // namespace detail

struct FlatQrInfo {
  Index total_rank = 0;
  Index mu_rank = 0;
  std::vector<Index> leading_columns;
};

/// In-place flat Householder QR on a block of pivot columns.
///
/// Columns [pivot_begin, pivot_end) are triangularized; every other column of
/// `a` (e.g. a residual column, or frame columns of a landmark block) is
/// transformed by the same reflectors. When the remaining norm of a pivot
/// column is <= zero_tol, the column is treated as dependent: its remaining
/// entries are set to zero and the next column reuses the same row, so the
/// result never has steps higher than one row.
///
/// `mu_rank` in the returned info is the number of rows produced by the first
/// n_mu pivot columns.
template <typename Derived, typename Scalar = typename Derived::Scalar>
FlatQrInfo flat_householder_in_place(
    Eigen::MatrixBase<Derived>& a, Index pivot_begin, Index pivot_end,
    Index n_mu, Scalar zero_tol,
    std::vector<HouseholderReflector<Scalar>>* reflectors = nullptr) {
  const Index rows = a.rows();
  FlatQrInfo info;
  Index i = 0;
  VecX<Scalar> v;
  Scalar beta;
  for (Index k = pivot_begin; k < pivot_end; ++k) {
    if (k - pivot_begin == n_mu) info.mu_rank = i;
    if (i >= rows) continue;

    auto x = a.col(k).segment(i, rows - i);
    const Scalar norm = x.norm();
    if (norm <= zero_tol) {
      x.setZero();
      continue;
    }
    detail::make_householder(x, v, beta);
    HouseholderReflector<Scalar> h{i, v, beta};
    h.apply(a);
    a(i, k) = norm;
    if (rows - i > 1) a.col(k).segment(i + 1, rows - i - 1).setZero();
    if (reflectors) reflectors->push_back(std::move(h));
    info.leading_columns.push_back(k);
    ++i;
  }
  if (pivot_end - pivot_begin <= n_mu) info.mu_rank = i;
  info.total_rank = i;
  return info;
}

/// Standard column-by-column Householder QR (Householder element always on
/// the diagonal). Rank-deficient input produces zero diagonal elements and
/// steps of height > 1. total_rank counts the rows of R with norm above the
/// default zero tolerance; mu_rank is reported for n_mu = cols.
template <typename Derived, typename Scalar = typename Derived::Scalar>
FlatQrResult<Scalar> householder_qr(const Eigen::MatrixBase<Derived>& a_in) {
  if (a_in.rows() < 1 || a_in.cols() < 1) {
    throw Error("householder_qr: matrix must have at least one row and column");
  }
  require_finite(a_in, "householder_qr");
  MatX<Scalar> a = a_in;
  const Index rows = a.rows();
  const Index cols = a.cols();
  const Index steps = std::min(rows, cols);

  FlatQrResult<Scalar> result;
  result.zero_tolerance_used = default_zero_tolerance(a_in);
  VecX<Scalar> v;
  Scalar beta;
  for (Index k = 0; k < steps; ++k) {
    auto x = a.col(k).segment(k, rows - k);
    const Scalar norm = detail::make_householder(x, v, beta);
    HouseholderReflector<Scalar> h{k, v, beta};
    h.apply(a);
    a(k, k) = norm;
    if (rows - k > 1) a.col(k).segment(k + 1, rows - k - 1).setZero();
    result.householder_data.push_back(std::move(h));
  }

  result.r_factor = a.topRows(steps);
  for (Index r = 0; r < steps; ++r) {
    const auto row = result.r_factor.row(r);
    if (row.norm() > result.zero_tolerance_used) {
      ++result.total_rank;
      Index lead = 0;
      while (lead < cols &&
             std::abs(row(lead)) <= result.zero_tolerance_used) {
        ++lead;
      }
      result.leading_columns.push_back(lead);
    }
  }
  result.mu_rank = result.total_rank;
  return result;
}

/// Rank-revealing flat QR without pivoting. r_factor keeps only the
/// total_rank nonzero rows.
template <typename Derived, typename Scalar = typename Derived::Scalar>
FlatQrResult<Scalar> flat_qr(const Eigen::MatrixBase<Derived>& a_in,
                             Index n_mu, Scalar zero_tol) {
  if (a_in.rows() < 1 || a_in.cols() < 1) {
    throw Error("flat_qr: matrix must have at least one row and column");
  }
  if (n_mu < 0 || n_mu > a_in.cols()) {
    throw Error("flat_qr: n_mu out of range");
  }
  if (!(zero_tol >= Scalar(0))) {
    throw Error("flat_qr: zero tolerance must be non-negative");
  }
  require_finite(a_in, "flat_qr");

  MatX<Scalar> a = a_in;
  FlatQrResult<Scalar> result;
  result.zero_tolerance_used = zero_tol;
  FlatQrInfo info = flat_householder_in_place(a, 0, a.cols(), n_mu, zero_tol,
                                              &result.householder_data);
  result.total_rank = info.total_rank;
  result.mu_rank = info.mu_rank;
  result.leading_columns = std::move(info.leading_columns);
  result.r_factor = a.topRows(info.total_rank);
  return result;
}

template <typename Derived, typename Scalar = typename Derived::Scalar>
FlatQrResult<Scalar> flat_qr(const Eigen::MatrixBase<Derived>& a_in,
                             Index n_mu) {
  return flat_qr(a_in, n_mu, default_zero_tolerance(a_in));
}

}  // namespace swba
