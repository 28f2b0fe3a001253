#pragma once

#include <vector>

#include <Eigen/Cholesky>

#include "swba/linalg/householder.hpp"
#include "swba/linalg/svd.hpp"
#include "swba/marg/prior.hpp"

namespace swba {

/// Stacked Jacobian/residual of everything touching the variables to be
/// marginalized. The first n_mu columns belong to the marginalized
/// variables, the remaining columns to kappa_index frames in order.
template <typename Scalar>
struct MarginalizationInput {
  MatX<Scalar> jac;
  VecX<Scalar> res;
  Index n_mu = 0;
  std::vector<FrameId> kappa_index;

  Index n_kappa() const { return jac.cols() - n_mu; }

  void validate() const {
    if (jac.rows() != res.size()) throw Error("marginalization input: rows(jac) != len(res)");
    if (n_mu < 0 || n_mu > jac.cols()) throw Error("marginalization input: n_mu out of range");
    if (n_kappa() != kPoseDim * static_cast<Index>(kappa_index.size())) {
      throw Error("marginalization input: kappa columns do not match kappa_index");
    }
  }
};

template <typename Scalar>
struct MarginalizationOutput {
  MarginalizationPrior<Scalar> prior;
  Index total_rank = 0;
  Index mu_rank = 0;
  /// Whether the pseudo-inverse was needed (SC path only).
  bool used_pseudo = false;
};

/// Schur complement of a normal-equation system (H, b) over the first n_mu
/// variables. With use_pseudo the Moore-Penrose inverse replaces H_mm^{-1}.
template <typename Scalar>
MarginalizationOutput<Scalar> marginalize_sc_hessian(const MatX<Scalar>& h,
                                                     const VecX<Scalar>& b,
                                                     Index n_mu, bool use_pseudo,
                                                     const std::vector<FrameId>& kappa_index) {
  const Index n = h.rows();
  const Index nk = n - n_mu;
  if (h.cols() != n || b.size() != n) throw Error("marginalize_sc: H/b dimension mismatch");
  if (n_mu < 0 || n_mu > n) throw Error("marginalize_sc: n_mu out of range");
  if (nk != kPoseDim * static_cast<Index>(kappa_index.size())) {
    throw Error("marginalize_sc: kappa columns do not match kappa_index");
  }
  require_finite(h, "marginalize_sc");

  MarginalizationOutput<Scalar> out;
  out.prior.frame_ids = kappa_index;
  out.prior.lin_points.resize(kappa_index.size());
  if (nk == 0) return out;
  out.prior.form = PriorForm::kSquared;

  const MatX<Scalar> hmm = h.topLeftCorner(n_mu, n_mu);
  const MatX<Scalar> hkm = h.bottomLeftCorner(nk, n_mu);
  if (n_mu == 0) {
    out.prior.h = h;
    out.prior.b = b;
    return out;
  }
  MatX<Scalar> hmm_inv_hmk;
  VecX<Scalar> hmm_inv_bm;
  Eigen::LLT<MatX<Scalar>> llt(hmm);
  const Scalar tol = default_rank_tolerance<Scalar>(n_mu, n_mu);
  bool singular = llt.info() != Eigen::Success;
  if (!singular) {
    const auto d = llt.matrixLLT().diagonal();
    singular = d.minCoeff() * d.minCoeff() <= tol * hmm.diagonal().maxCoeff();
  }
  if (!singular) {
    hmm_inv_hmk = llt.solve(hkm.transpose());
    hmm_inv_bm = llt.solve(b.head(n_mu));
    out.mu_rank = n_mu;
  } else {
    if (!use_pseudo) {
      throw NumericError(
          "marginalize_sc: H_mm is singular; enable pseudo-inverse mode");
    }
    const CompactSvd<Scalar> svd = compact_svd(hmm, tol);
    const MatX<Scalar> pinv =
        svd.v1 * svd.d1.cwiseInverse().asDiagonal() * svd.u1.transpose();
    hmm_inv_hmk = pinv * hkm.transpose();
    hmm_inv_bm = pinv * b.head(n_mu);
    out.used_pseudo = true;
    out.mu_rank = svd.rank;
  }
  MatX<Scalar> ht = h.bottomRightCorner(nk, nk) - hkm * hmm_inv_hmk;
  out.prior.h = Scalar(0.5) * (ht + ht.transpose());
  out.prior.b = b.tail(nk) - hkm * hmm_inv_bm;
  return out;
}

template <typename Scalar>
MarginalizationOutput<Scalar> marginalize_sc(const MarginalizationInput<Scalar>& in,
                                             bool use_pseudo) {
  in.validate();
  require_finite(in.jac, "marginalize_sc");
  const MatX<Scalar> h = in.jac.transpose() * in.jac;
  const VecX<Scalar> b = in.jac.transpose() * in.res;
  return marginalize_sc_hessian<Scalar>(h, b, in.n_mu, use_pseudo, in.kappa_index);
}

/// Flat QR of [J_mu J_kappa | r]; the rows after the first mu_rank rows,
/// restricted to the kappa columns, form the square-root prior.
template <typename Scalar>
MarginalizationOutput<Scalar> marginalize_qr(const MarginalizationInput<Scalar>& in,
                                             double zero_tol_factor = kDefaultZeroTolFactor) {
  in.validate();
  require_finite(in.jac, "marginalize_qr");
  require_finite(in.res, "marginalize_qr");
  MarginalizationOutput<Scalar> out;
  out.prior.frame_ids = in.kappa_index;
  out.prior.lin_points.resize(in.kappa_index.size());
  const Index nk = in.n_kappa();
  if (nk == 0) return out;
  out.prior.form = PriorForm::kSqrt;
  if (in.jac.rows() == 0) {
    out.prior.j.resize(0, nk);
    out.prior.r.resize(0);
    return out;
  }

  const Index n = in.jac.cols();
  MatX<Scalar> a(in.jac.rows(), n + 1);
  a.leftCols(n) = in.jac;
  a.col(n) = in.res;
  const Scalar tol = default_zero_tolerance(in.jac, zero_tol_factor);
  const FlatQrInfo info = flat_householder_in_place(a, 0, n, in.n_mu, tol);
  out.total_rank = info.total_rank;
  out.mu_rank = info.mu_rank;
  const Index k = info.total_rank - info.mu_rank;
  out.prior.j = a.block(info.mu_rank, in.n_mu, k, nk);
  out.prior.r = a.block(info.mu_rank, n, k, 1);
  return out;
}

/// Square root of the reduced system including variables not touched by the
/// marginalized residuals: [[J_k J_u]; [R 0]] and [r_new; r_prior].
template <typename Scalar>
std::pair<MatX<Scalar>, VecX<Scalar>> kappa_u_sqrt_system(
    const MatX<Scalar>& r_tilde, const VecX<Scalar>& res_tilde,
    const MatX<Scalar>& new_jac, const VecX<Scalar>& new_res) {
  if (r_tilde.rows() != res_tilde.size() || new_jac.rows() != new_res.size()) {
    throw Error("kappa_u_sqrt_system: row count mismatch");
  }
  const Index cols = std::max(new_jac.cols(), r_tilde.cols());
  if (new_jac.rows() > 0 && new_jac.cols() < r_tilde.cols()) {
    throw Error("kappa_u_sqrt_system: new blocks have fewer columns than the prior");
  }
  MatX<Scalar> j = MatX<Scalar>::Zero(new_jac.rows() + r_tilde.rows(), cols);
  VecX<Scalar> r(new_jac.rows() + r_tilde.rows());
  j.topLeftCorner(new_jac.rows(), new_jac.cols()) = new_jac;
  j.bottomLeftCorner(r_tilde.rows(), r_tilde.cols()) = r_tilde;
  r << new_res, res_tilde;
  return {j, r};
}

/// Recovers the marginalized variables from a reduced solution:
/// dx_mu = -H_mm^+ (b_m + H_mk dx_k) with H = J^T J, b = J^T r over the
/// residuals touching mu.
template <typename Scalar>
VecX<Scalar> back_substitute_mu(const MatX<Scalar>& j_mu, const MatX<Scalar>& j_kappa,
                                const VecX<Scalar>& res, const VecX<Scalar>& dx_kappa) {
  const MatX<Scalar> hmm = j_mu.transpose() * j_mu;
  const MatX<Scalar> hmk = j_mu.transpose() * j_kappa;
  const VecX<Scalar> bm = j_mu.transpose() * res;
  const MatX<Scalar> pinv =
      svd_pseudo_inverse(hmm, default_rank_tolerance<Scalar>(hmm.rows(), hmm.cols()));
  return -pinv * (bm + hmk * dx_kappa);
}

}  // namespace swba
