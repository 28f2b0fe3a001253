#pragma once

#include <Eigen/Cholesky>

#include "swba/graph/landmark_block.hpp"
#include "swba/linalg/householder.hpp"
#include "swba/linalg/svd.hpp"

namespace swba {

/// Applies the (flat) QR of the landmark columns to the whole block in place.
/// Rows [retained_rows, rows) then have zero landmark columns; the top rows
/// are kept for back substitution.
template <typename Scalar>
void ns_project_landmark(LandmarkBlock<Scalar>& blk,
                         double zero_tol_factor = kDefaultZeroTolFactor) {
  if (blk.state != BlockState::kLinearized) {
    throw Error("ns_project_landmark: block already projected");
  }
  const Index lc = blk.landmark_col();
  const Scalar tol = default_zero_tolerance(blk.storage.middleCols(lc, 3), zero_tol_factor);
  const FlatQrInfo info = flat_householder_in_place(blk.storage, lc, lc + 3, 3, tol);
  blk.retained_rows = info.total_rank;
  blk.degenerate = info.total_rank < 3;
  blk.state = BlockState::kNsProjected;
}

/// Per-landmark Schur complement data.
template <typename Scalar>
struct ScLandmarkReduction {
  /// (pseudo-)inverse of H_ll
  Mat3<Scalar> hll_inv;
  /// H_lp (3 x 6k) and b_l.
  MatX<Scalar> hlp;
  Vec3<Scalar> bl;
  /// H_pp - H_pl H_ll^-1 H_lp and b_p - H_pl H_ll^-1 b_l.
  MatX<Scalar> h_red;
  VecX<Scalar> b_red;
  bool degenerate = false;
};

template <typename Scalar>
ScLandmarkReduction<Scalar> sc_reduce_landmark(const LandmarkBlock<Scalar>& blk) {
  if (blk.state != BlockState::kLinearized) {
    throw Error("sc_reduce_landmark: block must be linearized, not projected");
  }
  const Index np = blk.landmark_col();
  const auto jp = blk.storage.leftCols(np);
  const auto jl = blk.storage.middleCols(np, 3);
  const auto r = blk.storage.col(blk.res_col());
  ScLandmarkReduction<Scalar> out;
  const Mat3<Scalar> hll = jl.transpose() * jl;
  out.hlp = jl.transpose() * jp;
  out.bl = jl.transpose() * r;

  Eigen::LLT<Mat3<Scalar>> llt(hll);
  const Scalar tol = default_rank_tolerance<Scalar>(3, 3) * hll.diagonal().maxCoeff();
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const auto d = llt.matrixLLT().diagonal();
    ok = d.minCoeff() * d.minCoeff() > tol;
  }
  if (ok) {
    out.hll_inv = llt.solve(Mat3<Scalar>::Identity());
  } else {
    out.hll_inv = svd_pseudo_inverse(hll, default_rank_tolerance<Scalar>(3, 3));
    out.degenerate = true;
  }
  const MatX<Scalar> hpl_hinv = out.hlp.transpose() * out.hll_inv;
  out.h_red = jp.transpose() * jp - hpl_hinv * out.hlp;
  out.b_red = jp.transpose() * r - hpl_hinv * out.bl;
  return out;
}

/// Landmark increment from the retained rows of a projected block:
/// R_l dl = -(r + A dx), minimum-norm when R_l is rank deficient.
template <typename Scalar>
Vec3<Scalar> ns_back_substitute(const LandmarkBlock<Scalar>& blk, const VecX<Scalar>& dx_frames) {
  const Index k = blk.retained_rows;
  if (k == 0) return Vec3<Scalar>::Zero();
  const Index lc = blk.landmark_col();
  const MatX<Scalar> rl = blk.storage.block(0, lc, k, 3);
  const VecX<Scalar> rhs =
      -(blk.storage.block(0, blk.res_col(), k, 1) + blk.storage.topLeftCorner(k, lc) * dx_frames);
  if (k == 3) {
    return rl.template triangularView<Eigen::Upper>().solve(rhs);
  }
  return svd_pseudo_inverse(rl, default_rank_tolerance<Scalar>(k, 3)) * rhs;
}

/// dl = -H_ll^-1 (b_l + H_lp dx).
template <typename Scalar>
Vec3<Scalar> sc_back_substitute(const ScLandmarkReduction<Scalar>& red, const VecX<Scalar>& dx_frames) {
  return -red.hll_inv * (red.bl + red.hlp * dx_frames);
}

}  // namespace swba
