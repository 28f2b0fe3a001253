#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "swba/marg/marginalize.hpp"

namespace gen {

using namespace swba;

inline std::vector<FrameId> kappa_ids(Index n_kappa) {
  std::vector<FrameId> ids;
  for (Index i = 0; i < n_kappa / kPoseDim; ++i) ids.push_back(10 + i);
  return ids;
}

/// Overdetermined full-rank input: rows <= max_rows, n_mu in [1, max_mu],
/// n_kappa a multiple of the pose dimension in [6, max_kappa].
inline MarginalizationInput<double> full_rank_input(oracle::Rng& rng, Index max_rows = 40, Index max_mu = 12,
                                                    Index max_kappa = 24) {
  MarginalizationInput<double> in;
  const Index n_kappa = kPoseDim * rng.integer(1, static_cast<int>(max_kappa / kPoseDim));
  const Index n_mu = rng.integer(1, static_cast<int>(std::min(max_mu, max_rows - n_kappa)));
  const Index rows = rng.integer(static_cast<int>(n_mu + n_kappa), static_cast<int>(max_rows));
  in.n_mu = n_mu;
  in.kappa_index = kappa_ids(n_kappa);
  in.jac = rng.gaussian(rows, n_mu + n_kappa);
  in.res = rng.gaussian(rows);
  return in;
}

/// J_mu with forced column dependencies. With exact_duplicates the dependent
/// columns are copies of independent ones scaled by +-2^k, so the rank
/// deficiency is exact in floating point. Otherwise they are random linear
/// combinations, whose dependency only holds up to rounding.
inline MarginalizationInput<double> deficient_mu_input(oracle::Rng& rng, bool exact_duplicates = true,
                                                       Index max_rows = 40, Index max_mu = 12,
                                                       Index max_kappa = 24) {
  MarginalizationInput<double> in;
  const Index n_kappa = kPoseDim * rng.integer(1, static_cast<int>(max_kappa / kPoseDim));
  const Index n_mu = rng.integer(2, static_cast<int>(std::min(max_mu, max_rows - n_kappa)));
  const Index rows = rng.integer(static_cast<int>(n_mu + n_kappa), static_cast<int>(max_rows));
  const Index rank_mu = rng.integer(1, static_cast<int>(n_mu - 1));
  MatXd jm(rows, n_mu);
  jm.leftCols(rank_mu) = rng.gaussian(rows, rank_mu);
  for (Index c = rank_mu; c < n_mu; ++c) {
    if (exact_duplicates) {
      const double scale = std::ldexp(rng.integer(0, 1) ? 1.0 : -1.0, rng.integer(-2, 2));
      jm.col(c) = scale * jm.col(rng.integer(0, static_cast<int>(rank_mu - 1)));
    } else {
      jm.col(c) = jm.leftCols(rank_mu) * rng.gaussian(rank_mu);
    }
  }
  // Shuffle so dependent columns are not always last.
  std::vector<Index> perm(n_mu);
  for (Index i = 0; i < n_mu; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng.gen);
  MatXd shuffled(rows, n_mu);
  for (Index i = 0; i < n_mu; ++i) shuffled.col(i) = jm.col(perm[i]);
  in.n_mu = n_mu;
  in.kappa_index = kappa_ids(n_kappa);
  in.jac.resize(rows, n_mu + n_kappa);
  in.jac << shuffled, rng.gaussian(rows, n_kappa);
  in.res = rng.gaussian(rows);
  return in;
}

/// Full problem for the minimum-norm check: rows touching mu
/// [J_mu J_kappa 0 | r] and rows not touching mu [0 J_kappa' J_u | r'].
struct MinNormInstance {
  MarginalizationInput<double> marg;
  MatXd other_jac;  // over kappa and u columns
  VecXd other_res;
  Index n_u = 0;

  MatXd full_jac() const {
    const Index n_mu = marg.n_mu, nk = marg.n_kappa();
    MatXd j = MatXd::Zero(marg.jac.rows() + other_jac.rows(), n_mu + nk + n_u);
    j.topLeftCorner(marg.jac.rows(), n_mu + nk) = marg.jac;
    j.bottomRightCorner(other_jac.rows(), nk + n_u) = other_jac;
    return j;
  }
  VecXd full_res() const {
    VecXd r(marg.res.size() + other_res.size());
    r << marg.res, other_res;
    return r;
  }
};

inline MinNormInstance min_norm_instance(oracle::Rng& rng) {
  MinNormInstance m;
  const Index n_mu = rng.integer(1, 8);
  const Index n_kappa = kPoseDim * rng.integer(1, 2);
  m.n_u = rng.integer(0, 6);
  const Index rows_a = rng.integer(2, 18);
  const Index rows_b = rng.integer(2, 24);
  // Deficient blocks exercise the pseudo-inverse branches.
  const Index rank_mu = rng.integer(1, static_cast<int>(std::min(n_mu, rows_a)));
  m.marg.n_mu = n_mu;
  m.marg.kappa_index = kappa_ids(n_kappa);
  m.marg.jac.resize(rows_a, n_mu + n_kappa);
  m.marg.jac << rng.of_rank(rows_a, n_mu, rank_mu), rng.gaussian(rows_a, n_kappa);
  m.marg.res = rng.gaussian(rows_a);
  const Index cols_b = n_kappa + m.n_u;
  m.other_jac = rng.of_rank(rows_b, cols_b, rng.integer(1, static_cast<int>(std::min(rows_b, cols_b))));
  m.other_res = rng.gaussian(rows_b);
  return m;
}

/// rank(J_mu) + rank([J_kappa J_u]) == rank(J) on the full problem.
inline bool min_norm_condition(const MinNormInstance& m) {
  const MatXd j = m.full_jac();
  const Index n_mu = m.marg.n_mu;
  return oracle::svd_rank(j.leftCols(n_mu)) + oracle::svd_rank(j.rightCols(j.cols() - n_mu)) ==
         oracle::svd_rank(j);
}

/// Reduced solve through the square-root prior, then back-substitution.
/// Returns the stacked solution [dx_mu; dx_kappa; dx_u].
inline VecXd reduced_then_back_substitute(const MinNormInstance& m) {
  const auto out = marginalize_qr(m.marg);
  const Index nk = m.marg.n_kappa();
  MatXd other = m.other_jac;
  if (other.rows() == 0) other.resize(0, nk + m.n_u);
  const auto [j_red, r_red] = kappa_u_sqrt_system(out.prior.j, out.prior.r, other, m.other_res);
  const VecXd dx_red = -svd_pseudo_inverse(j_red) * r_red;
  const VecXd dx_mu = back_substitute_mu<double>(m.marg.jac.leftCols(m.marg.n_mu), m.marg.jac.rightCols(nk),
                                                 m.marg.res, dx_red.head(nk));
  VecXd x(m.marg.n_mu + dx_red.size());
  x << dx_mu, dx_red;
  return x;
}

}  // namespace gen
