#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "marg_generators.hpp"
#include "oracles.hpp"
#include "swba/linalg/svd.hpp"
#include "swba/marg/marginalize.hpp"
#include "swba/marg/prior.hpp"

using namespace swba;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

MarginalizationPrior<double> random_sqrt_prior(oracle::Rng& rng, int frames, Index rows) {
  MarginalizationPrior<double> p;
  p.form = PriorForm::kSqrt;
  for (int i = 0; i < frames; ++i) {
    p.frame_ids.push_back(i);
    ChartPoint<double> cp;
    cp.anchor = Pose<double>(so3_exp_quat<double>(Eigen::Vector3d(rng.gaussian(3))), rng.gaussian(3));
    cp.offset = rng.gaussian(6) * 0.1;
    p.lin_points.push_back(cp);
  }
  p.j = rng.gaussian(rows, p.dim());
  p.r = rng.gaussian(rows);
  return p;
}

std::map<FrameId, Vec6<double>> random_offsets(oracle::Rng& rng, const MarginalizationPrior<double>& p) {
  std::map<FrameId, Vec6<double>> m;
  for (FrameId f : p.frame_ids) m[f] = rng.gaussian(6);
  return m;
}

}  // namespace

TEST(PriorEnergy, AtLinearizationPoint) {
  oracle::Rng rng(101);
  const auto p = random_sqrt_prior(rng, 2, 12);
  const VecXd zero = VecXd::Zero(p.dim());
  EXPECT_DOUBLE_EQ(prior_energy(p, zero), 0.5 * p.r.squaredNorm());
  EXPECT_EQ(prior_energy(squared_from_sqrt(p), zero), 0.0);
}

TEST(PriorEnergy, ConvertedPairDiffersByHalfResidualNorm) {
  oracle::Rng rng(102);
  const auto p = random_sqrt_prior(rng, 3, 15);
  const auto q = squared_from_sqrt(p);
  const double c = 0.5 * p.r.squaredNorm();
  for (int t = 0; t < 100; ++t) {
    const VecXd d = rng.gaussian(p.dim());
    const double es = prior_energy(p, d);
    EXPECT_NEAR(es - prior_energy(q, d), c, 1e-11 * std::max(1.0, es));
  }
}

TEST(PriorEnergy, SecondDifferenceIsQuadraticForm) {
  oracle::Rng rng(103);
  const auto p = random_sqrt_prior(rng, 2, 10);
  const MatXd h = p.j.transpose() * p.j;
  for (const auto& prior : {p, squared_from_sqrt(p)}) {
    for (int t = 0; t < 20; ++t) {
      const VecXd d = rng.gaussian(p.dim());
      const double lhs = prior_energy(prior, VecXd(2 * d)) - 2 * prior_energy(prior, d) +
                         prior_energy(prior, VecXd(VecXd::Zero(p.dim())));
      const double rhs = d.dot(h * d);
      EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, rhs));
    }
  }
}

TEST(PriorEnergy, MissingVariableIsAnError) {
  oracle::Rng rng(104);
  const auto p = random_sqrt_prior(rng, 2, 6);
  std::map<FrameId, Vec6<double>> offsets;
  offsets[0] = Vec6<double>::Zero();
  EXPECT_THROW(prior_energy(p, offsets), Error);
  EXPECT_THROW(prior_energy(p, VecXd(VecXd::Zero(5))), Error);
}

TEST(ShiftPrior, ZeroShiftIsIdentity) {
  oracle::Rng rng(105);
  const auto p = random_sqrt_prior(rng, 2, 8);
  const auto s = shift_prior(p, VecXd(VecXd::Zero(p.dim())));
  EXPECT_EQ(s.r, p.r);
  EXPECT_EQ(s.j, p.j);
  for (std::size_t i = 0; i < p.lin_points.size(); ++i) EXPECT_EQ(s.lin_points[i].offset, p.lin_points[i].offset);
}

TEST(ShiftPrior, ForwardThenBackRestores) {
  oracle::Rng rng(106);
  const auto p = random_sqrt_prior(rng, 3, 12);
  const auto q = squared_from_sqrt(p);
  const VecXd d = rng.gaussian(p.dim());
  const auto p2 = shift_prior(shift_prior(p, d), VecXd(-d));
  const auto q2 = shift_prior(shift_prior(q, d), VecXd(-d));
  EXPECT_LE((p2.r - p.r).norm(), 20 * kEps * (p.r.norm() + (p.j * d).norm()));
  EXPECT_LE((q2.b - q.b).norm(), 20 * kEps * (q.b.norm() + (q.h * d).norm()));
  EXPECT_EQ(p2.j, p.j);
  EXPECT_EQ(q2.h, q.h);
}

TEST(ShiftPrior, EnergyOfAStateIsUnchanged) {
  oracle::Rng rng(107);
  const auto p = random_sqrt_prior(rng, 2, 12);
  for (const auto& prior : {p, squared_from_sqrt(p)}) {
    const auto s = shift_prior(prior, VecXd(rng.gaussian(p.dim())));
    const auto x0 = random_offsets(rng, p);
    const double c0 = prior_energy(s, x0) - prior_energy(prior, x0);
    for (int t = 0; t < 100; ++t) {
      const auto x = random_offsets(rng, p);
      const double e = prior_energy(prior, x);
      EXPECT_NEAR(prior_energy(s, x) - e, c0, 1e-10 * std::max(1.0, e));
    }
  }
}

TEST(ShiftPrior, DimensionMismatchIsAnError) {
  oracle::Rng rng(108);
  const auto p = random_sqrt_prior(rng, 2, 6);
  EXPECT_THROW(shift_prior(p, VecXd(VecXd::Zero(7))), Error);
}

TEST(MarginalizeSc, DecoupledIdentity) {
  MarginalizationInput<double> in;
  in.n_mu = 6;
  in.kappa_index = {1};
  in.jac = MatXd::Identity(12, 12);
  in.res = VecXd::LinSpaced(12, 1.0, 12.0);
  const auto out = marginalize_sc(in, false);
  EXPECT_TRUE(out.prior.h.isApprox(MatXd::Identity(6, 6)));
  EXPECT_TRUE(out.prior.b.isApprox(in.res.tail(6)));
  EXPECT_EQ(out.prior.form, PriorForm::kSquared);
}

TEST(MarginalizeSc, MatchesBruteForceSchur) {
  oracle::Rng rng(109);
  MarginalizationInput<double> in;
  // kappa is one whole pose, so 3 + 6 columns.
  in.n_mu = 3;
  in.kappa_index = {7};
  in.jac = rng.gaussian(12, 9);
  in.res = rng.gaussian(12);
  const auto out = marginalize_sc(in, false);
  const auto ref = oracle::schur_brute_force(in.jac, in.res, 3);
  EXPECT_LE(oracle::rel_err(out.prior.h, ref.h), 50 * kEps);
  EXPECT_LE(oracle::rel_err(out.prior.b, ref.b), 50 * kEps);
  EXPECT_FALSE(out.used_pseudo);
}

TEST(MarginalizeSc, PseudoModeMatchesProjectorOracle) {
  oracle::Rng rng(110);
  for (int t = 0; t < 100; ++t) {
    const auto in = gen::deficient_mu_input(rng);
    const auto out = marginalize_sc(in, true);
    const auto ref = oracle::pseudo_schur_projector(in.jac, in.res, in.n_mu);
    EXPECT_LE(oracle::rel_err(out.prior.h, ref.h), 1e-12);
    EXPECT_LE(oracle::rel_err(out.prior.b, ref.b), 1e-12);
    EXPECT_TRUE(out.used_pseudo);
    EXPECT_EQ(out.mu_rank, oracle::svd_rank(in.jac.leftCols(in.n_mu)));
  }
}

TEST(MarginalizeSc, SingularWithoutPseudoModeThrows) {
  MarginalizationInput<double> in;
  in.n_mu = 2;
  in.kappa_index = {1};
  in.jac = MatXd::Zero(10, 8);
  in.jac.col(0).setOnes();
  in.jac.col(1).setOnes();
  in.jac.rightCols(6) = MatXd::Identity(10, 6);
  in.res = VecXd::Ones(10);
  try {
    marginalize_sc(in, false);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("pseudo"), std::string::npos);
  }
  EXPECT_NO_THROW(marginalize_sc(in, true));
}

TEST(MarginalizeSc, ValidatesInput) {
  MarginalizationInput<double> in;
  in.n_mu = 1;
  in.kappa_index = {1};
  in.jac = MatXd::Zero(4, 6);
  in.res = VecXd::Zero(4);
  EXPECT_THROW(marginalize_sc(in, true), Error);
  in.jac = MatXd::Zero(4, 7);
  in.res = VecXd::Zero(3);
  EXPECT_THROW(marginalize_sc(in, true), Error);
}

TEST(MarginalizeQr, MatchesScOnFullRankInputs) {
  oracle::Rng rng(111);
  for (int t = 0; t < 200; ++t) {
    const auto in = gen::full_rank_input(rng);
    const auto qr = marginalize_qr(in);
    const auto sc = marginalize_sc(in, false);
    const MatXd h = qr.prior.j.transpose() * qr.prior.j;
    const VecXd b = qr.prior.j.transpose() * qr.prior.r;
    EXPECT_LE((h - sc.prior.h).norm(), 50 * kEps * sc.prior.h.norm());
    EXPECT_LE((b - sc.prior.b).norm(), 50 * kEps * sc.prior.b.norm());
    EXPECT_EQ(qr.mu_rank, in.n_mu);
    EXPECT_EQ(qr.prior.j.rows(), oracle::svd_rank(sc.prior.h, 1e-12));
    EXPECT_NO_THROW(qr.prior.validate());
  }
}

TEST(MarginalizeQr, MatchesPseudoScOnDuplicatedColumns) {
  oracle::Rng rng(112);
  for (int t = 0; t < 200; ++t) {
    const auto in = gen::deficient_mu_input(rng);
    const auto qr = marginalize_qr(in);
    const auto ref = oracle::pseudo_schur_projector(in.jac, in.res, in.n_mu);
    const MatXd h = qr.prior.j.transpose() * qr.prior.j;
    const VecXd b = qr.prior.j.transpose() * qr.prior.r;
    EXPECT_LE((h - ref.h).norm(), 50 * kEps * ref.h.norm());
    EXPECT_LE((b - ref.b).norm(), 50 * kEps * ref.b.norm());
    EXPECT_EQ(qr.mu_rank, oracle::svd_rank(in.jac.leftCols(in.n_mu)));
  }
}

// Dependencies that hold only up to rounding: the pseudo-SC itself is then
// only defined to about 1e-13, so the check is looser and the rank is only
// compared where the retained columns are well conditioned.
TEST(MarginalizeQr, MatchesPseudoScOnCombinedColumns) {
  oracle::Rng rng(113);
  for (int t = 0; t < 200; ++t) {
    const auto in = gen::deficient_mu_input(rng, false);
    const auto qr = marginalize_qr(in);
    const auto ref = oracle::pseudo_schur_projector(in.jac, in.res, in.n_mu);
    const MatXd jm = in.jac.leftCols(in.n_mu);
    const Index k = oracle::svd_rank(jm);
    Eigen::BDCSVD<MatXd> svd(jm);
    const double cond = svd.singularValues()(0) / svd.singularValues()(k - 1);
    if (cond > 1e3) continue;
    const MatXd h = qr.prior.j.transpose() * qr.prior.j;
    EXPECT_LE(oracle::rel_err(h, ref.h), 1e-10);
    EXPECT_EQ(qr.mu_rank, k);
  }
}

TEST(MarginalizeQr, EmptyKappaGivesEmptyPrior) {
  oracle::Rng rng(114);
  MarginalizationInput<double> in;
  in.n_mu = 6;
  in.jac = rng.gaussian(10, 6);
  in.res = rng.gaussian(10);
  const auto out = marginalize_qr(in);
  EXPECT_TRUE(out.prior.empty());
  EXPECT_EQ(out.prior.dim(), 0);
  EXPECT_EQ(prior_energy(out.prior, VecXd(0)), 0.0);
}

TEST(MarginalizeQr, RowsEqualRankOfSchurComplement) {
  oracle::Rng rng(115);
  // Fewer rows than columns: the prior has fewer rows than kappa dims.
  for (int t = 0; t < 50; ++t) {
    MarginalizationInput<double> in;
    in.n_mu = 6;
    in.kappa_index = {1, 2};
    const Index rows = rng.integer(7, 17);
    in.jac = rng.gaussian(rows, 18);
    in.res = rng.gaussian(rows);
    const auto out = marginalize_qr(in);
    EXPECT_EQ(out.prior.j.rows(), rows - 6);
    EXPECT_EQ(out.prior.j.rows(),
              oracle::svd_rank(MatXd(marginalize_sc(in, false).prior.h), 1e-10));
  }
}

TEST(MarginalizeQr, SqrtPriorGramIsNotIndefinite) {
  oracle::Rng rng(116);
  for (int t = 0; t < 200; ++t) {
    const auto in = t % 2 ? gen::full_rank_input(rng) : gen::deficient_mu_input(rng);
    const auto out = marginalize_qr(in);
    const MatXd h = out.prior.hessian();
    EXPECT_GE(min_eigenvalue(h), -10 * kEps * h.norm());
  }
}

TEST(SqrtFromSquared, IdentityKeepsGradient) {
  MarginalizationPrior<double> p;
  p.form = PriorForm::kSquared;
  p.frame_ids = {3};
  p.lin_points.resize(1);
  p.h = MatXd::Identity(6, 6);
  p.b = VecXd::LinSpaced(6, -1.0, 2.0);
  const auto c = sqrt_from_squared(p);
  EXPECT_TRUE(c.prior.j.isApprox(MatXd::Identity(6, 6)));
  EXPECT_TRUE(c.prior.r.isApprox(p.b));
  EXPECT_FALSE(c.definiteness_warning());
}

TEST(SqrtFromSquared, RoundTripReproducesPsdInput) {
  oracle::Rng rng(117);
  for (int t = 0; t < 50; ++t) {
    const Index rows = rng.integer(1, 18);
    const auto sq = squared_from_sqrt(random_sqrt_prior(rng, 2, rows));
    const auto c = sqrt_from_squared(sq);
    const auto back = squared_from_sqrt(c.prior);
    EXPECT_LE(oracle::rel_err(back.h, sq.h), 1e-12);
    EXPECT_LE(oracle::rel_err(back.b, sq.b), 1e-9);
    EXPECT_EQ(c.negative_pivots, 0);
  }
}

TEST(SqrtFromSquared, IndefiniteSinglePrecisionWarns) {
  MarginalizationPrior<float> p;
  p.form = PriorForm::kSquared;
  p.frame_ids = {0};
  p.lin_points.resize(1);
  Eigen::VectorXf d(6);
  d << 1, 1, 1, 1, 1, -1e-3f;
  p.h = d.asDiagonal();
  p.b = Eigen::VectorXf::Ones(6);
  const auto c = sqrt_from_squared(p);
  EXPECT_TRUE(c.definiteness_warning());
  EXPECT_EQ(c.negative_pivots, 1);
  EXPECT_NEAR(c.most_negative_pivot, -1e-3, 1e-6);
  // Clamped: the negative direction is dropped from the square root.
  EXPECT_EQ(c.prior.j.rows(), 5);
  EXPECT_GE(min_eigenvalue(MatXd(c.prior.hessian().cast<double>())), 0.0 - 1e-6);
}

TEST(SqrtFromSquared, RejectsWrongForm) {
  oracle::Rng rng(118);
  const auto p = random_sqrt_prior(rng, 1, 6);
  EXPECT_THROW(sqrt_from_squared(p), Error);
  EXPECT_THROW(squared_from_sqrt(squared_from_sqrt(p)), Error);
}

TEST(SqrtFromSquared, CommutesWithShift) {
  oracle::Rng rng(119);
  for (int t = 0; t < 20; ++t) {
    const auto sq = squared_from_sqrt(random_sqrt_prior(rng, 2, 12));
    const VecXd delta = rng.gaussian(sq.dim());
    const auto a = sqrt_from_squared(shift_prior(sq, delta)).prior;
    const auto b = shift_prior(sqrt_from_squared(sq).prior, delta);
    const auto x0 = random_offsets(rng, sq);
    const double c0 = prior_energy(a, x0) - prior_energy(b, x0);
    for (int k = 0; k < 20; ++k) {
      const auto x = random_offsets(rng, sq);
      const double e = prior_energy(b, x);
      EXPECT_NEAR(prior_energy(a, x) - e, c0, 1e-9 * std::max(1.0, e));
    }
  }
}

TEST(KappaUSystem, NoNewBlocksPadsPrior) {
  oracle::Rng rng(120);
  const MatXd r = rng.gaussian(4, 6);
  const VecXd res = rng.gaussian(4);
  const auto [j, v] = kappa_u_sqrt_system<double>(r, res, MatXd(0, 9), VecXd(0));
  ASSERT_EQ(j.rows(), 4);
  ASSERT_EQ(j.cols(), 9);
  EXPECT_EQ(j.leftCols(6), r);
  EXPECT_TRUE(j.rightCols(3).isZero(0));
  EXPECT_EQ(v, res);
}

TEST(KappaUSystem, RowMismatchIsAnError) {
  oracle::Rng rng(121);
  EXPECT_THROW(kappa_u_sqrt_system<double>(rng.gaussian(4, 6), rng.gaussian(3), MatXd(0, 6), VecXd(0)), Error);
  EXPECT_THROW(kappa_u_sqrt_system<double>(rng.gaussian(4, 6), rng.gaussian(4), rng.gaussian(2, 5), rng.gaussian(2)),
               Error);
}

// Gram of the stacked system equals the reduced normal equations assembled
// from the explicit Schur complement.
TEST(KappaUSystem, GramMatchesDenseReducedSystem) {
  oracle::Rng rng(122);
  for (int t = 0; t < 50; ++t) {
    const auto m = gen::min_norm_instance(rng);
    const auto qr = marginalize_qr(m.marg);
    const auto [j, r] = kappa_u_sqrt_system(qr.prior.j, qr.prior.r, m.other_jac, m.other_res);
    const auto sc = oracle::pseudo_schur_projector(m.marg.jac, m.marg.res, m.marg.n_mu);
    const Index nk = m.marg.n_kappa();
    MatXd h = m.other_jac.transpose() * m.other_jac;
    VecXd b = m.other_jac.transpose() * m.other_res;
    h.topLeftCorner(nk, nk) += sc.h;
    b.head(nk) += sc.b;
    EXPECT_LE(oracle::rel_err(j.transpose() * j, h), 1e-12);
    EXPECT_LE(oracle::rel_err(j.transpose() * r, b), 1e-11);
  }
}

TEST(MinimumNorm, ReducedSolveMatchesFullPseudoInverse) {
  oracle::Rng rng(123);
  int checked = 0;
  double worst = 0.0;
  for (int t = 0; t < 400 && checked < 100; ++t) {
    const auto m = gen::min_norm_instance(rng);
    if (!gen::min_norm_condition(m)) continue;
    ++checked;
    const VecXd x = gen::reduced_then_back_substitute(m);
    const VecXd ref = -oracle::pinv(m.full_jac()) * m.full_res();
    worst = std::max(worst, oracle::rel_err(x, ref, 1e-12));
  }
  EXPECT_GE(checked, 50);
  EXPECT_LE(worst, 1e-8);
}

TEST(BackSubstitution, RecoversFullSolutionForFullRank) {
  oracle::Rng rng(124);
  for (int t = 0; t < 50; ++t) {
    const auto in = gen::full_rank_input(rng);
    const VecXd full = -oracle::pinv(in.jac) * in.res;
    const Index nk = in.n_kappa();
    const VecXd mu = back_substitute_mu<double>(in.jac.leftCols(in.n_mu), in.jac.rightCols(nk), in.res,
                                                full.tail(nk));
    EXPECT_LE(oracle::rel_err(mu, full.head(in.n_mu), 1e-12), 1e-9);
  }
}
