#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "graph_fixtures.hpp"
#include "oracles.hpp"
#include "swba/estimator/estimator.hpp"

using namespace swba;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

SolverConfig config(OptBackend opt, MargBackend marg, GaugeMode mode = GaugeMode::kVioLike) {
  SolverConfig c;
  c.opt_backend = opt;
  c.marg_backend = marg;
  c.gauge_mode = mode;
  return c;
}

SlidingWindowEstimator<double> make_estimator(const SolverConfig& c, const WindowProblem<double>& w) {
  SlidingWindowEstimator<double> est(c, w.rig);
  est.problem() = w;
  return est;
}

WindowProblem<double> anchored_window(oracle::Rng& rng, int frames, int landmarks, double perturb) {
  auto w = fixtures::random_window(rng, frames, landmarks, perturb);
  w.residuals.push_back(fixtures::absolute_prior(w.frames[0].id, w.frames[0].pose, Mat6<double>::Identity() * 100.0));
  return w;
}

// Dense Jacobian over [frames | landmarks] in window / id order.
struct JointSystem {
  MatXd j;
  VecXd r;
  std::map<LandmarkId, Index> lm_col;
};

JointSystem joint_system(const WindowProblem<double>& w) {
  const auto order = w.frame_ids();
  std::map<FrameId, Index> fcol;
  for (std::size_t i = 0; i < order.size(); ++i) fcol[order[i]] = 6 * i;
  JointSystem s;
  Index n = 6 * order.size();
  for (const auto& [id, lm] : w.landmarks) {
    s.lm_col[id] = n;
    n += 3;
  }
  std::vector<ResidualEval<double>> evs;
  Index rows = 0;
  for (const auto& rb : w.residuals) {
    evs.push_back(evaluate_residual(rb, w));
    rows += evs.back().r.size();
  }
  s.j = MatXd::Zero(rows, n);
  s.r = VecXd::Zero(rows);
  Index row = 0;
  for (std::size_t i = 0; i < evs.size(); ++i) {
    const auto& ev = evs[i];
    const Index m = ev.r.size();
    for (std::size_t k = 0; k < ev.frame_ids.size(); ++k) {
      s.j.block(row, fcol.at(ev.frame_ids[k]), m, 6) += ev.frame_jacs[k];
    }
    if (w.residuals[i].kind == ResidualKind::kReprojection) {
      s.j.block(row, s.lm_col.at(w.residuals[i].landmark), m, 3) = ev.landmark_jac;
    }
    s.r.segment(row, m) = ev.r;
    row += m;
  }
  return s;
}

}  // namespace

TEST(NsProjection, ProjectedGramEqualsPerLandmarkSchur) {
  oracle::Rng rng(201);
  for (int t = 0; t < 30; ++t) {
    const auto w = fixtures::random_window(rng, 4, 5, 0.5);
    for (auto blk : assemble_landmark_blocks(w, w.frame_ids())) {
      const auto sc = sc_reduce_landmark(blk);
      ns_project_landmark(blk);
      ASSERT_EQ(blk.retained_rows, 3);
      const Index np = blk.landmark_col();
      const auto p = blk.storage.bottomRows(blk.rows() - 3);
      EXPECT_LE(p.middleCols(np, 3).norm(), 1e-12 * blk.storage.norm());
      const MatXd g = p.leftCols(np).transpose() * p.leftCols(np);
      const VecXd gb = p.leftCols(np).transpose() * p.col(blk.res_col());
      EXPECT_LE(oracle::rel_err(g, sc.h_red), 1e-10);
      EXPECT_LE(oracle::rel_err(gb, sc.b_red), 1e-9);
    }
  }
}

TEST(NsProjection, SingleObservationKeepsAllRows) {
  oracle::Rng rng(202);
  auto w = fixtures::random_window(rng, 1, 1, 0.0);
  std::erase_if(w.residuals, [](const ResidualBlock<double>& b) { return b.camera == 1; });
  auto blocks = assemble_landmark_blocks(w);
  ASSERT_EQ(blocks.size(), 1u);
  auto& blk = blocks[0];
  ASSERT_EQ(blk.rows(), 2);
  ns_project_landmark(blk);
  EXPECT_EQ(blk.retained_rows, 2);
  EXPECT_EQ(blk.projected_rows(), 0);
  EXPECT_TRUE(blk.degenerate);
  EXPECT_THROW(ns_project_landmark(blk), Error);
}

// The projection is orthogonal: the Gram of [J r] is preserved and the
// row count never changes.
TEST(NsProjection, IsAnOrthogonalTransform) {
  oracle::Rng rng(203);
  for (int t = 0; t < 20; ++t) {
    const auto w = fixtures::random_window(rng, 3, 3, 0.5);
    for (auto blk : assemble_landmark_blocks(w, w.frame_ids())) {
      const MatXd before = blk.storage;
      ns_project_landmark(blk);
      EXPECT_EQ(blk.storage.rows(), before.rows());
      const MatXd g0 = before.transpose() * before;
      const MatXd g1 = blk.storage.transpose() * blk.storage;
      EXPECT_LE(oracle::rel_err(g1, g0), 1e-13);
    }
  }
}

TEST(SolveRcs, ZeroResidualGivesZeroIncrement) {
  oracle::Rng rng(204);
  const auto w = anchored_window(rng, 3, 4, 0.0);
  for (OptBackend b : {OptBackend::kNsLdlt, OptBackend::kScLdlt}) {
    auto est = make_estimator(config(b, MargBackend::kNsQr), w);
    const auto sys = est.linearize_reduced(b);
    VecXd dx;
    ASSERT_TRUE(est.solve_rcs(sys, 1e-4, dx));
    EXPECT_LE(dx.norm(), 1e-9);
    for (const auto& [id, d] : est.back_substitute(sys, dx)) EXPECT_LE(d.norm(), 1e-9);
  }
}

TEST(SolveRcs, BackendsAgree) {
  oracle::Rng rng(205);
  for (int t = 0; t < 20; ++t) {
    const auto w = anchored_window(rng, 5, 8, 1.0);
    auto ns = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kNsQr), w);
    auto sc = make_estimator(config(OptBackend::kScLdlt, MargBackend::kScSc), w);
    const auto sys_ns = ns.linearize_reduced(OptBackend::kNsLdlt);
    const auto sys_sc = sc.linearize_reduced(OptBackend::kScLdlt);
    EXPECT_LE(oracle::rel_err(sys_ns.h, sys_sc.h), 1e-10);
    VecXd dx_ns, dx_sc;
    ASSERT_TRUE(ns.solve_rcs(sys_ns, 1e-4, dx_ns));
    ASSERT_TRUE(sc.solve_rcs(sys_sc, 1e-4, dx_sc));
    EXPECT_LE(oracle::rel_err(dx_ns, dx_sc), 1e-8);
    const auto dl_ns = ns.back_substitute(sys_ns, dx_ns);
    const auto dl_sc = sc.back_substitute(sys_sc, dx_ns);
    for (const auto& [id, d] : dl_ns) EXPECT_LE((d - dl_sc.at(id)).norm(), 1e-8 * std::max(1.0, d.norm()));
  }
}

TEST(SolveRcs, SatisfiesDampedNormalEquations) {
  oracle::Rng rng(206);
  for (int t = 0; t < 20; ++t) {
    const auto w = anchored_window(rng, 4, 6, 1.0);
    auto est = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kNsQr), w);
    const auto sys = est.linearize_reduced(OptBackend::kNsLdlt);
    const double lambda = 1e-3;
    VecXd dx;
    ASSERT_TRUE(est.solve_rcs(sys, lambda, dx));
    MatXd hd = sys.h;
    for (Index i = 0; i < hd.rows(); ++i) hd(i, i) += lambda * std::max(sys.h(i, i), 1e-6);
    EXPECT_LE((hd * dx + sys.b).norm(), 1e-10 * sys.b.norm());
  }
}

// Undamped reduced solve plus back substitution equals the dense joint
// Gauss-Newton step over frames and landmarks.
TEST(BackSubstitute, MatchesJointDenseSolve) {
  oracle::Rng rng(207);
  for (int t = 0; t < 20; ++t) {
    const auto w = anchored_window(rng, 4, 5, 1.0);
    const auto js = joint_system(w);
    const VecXd ref = -oracle::pinv(js.j) * js.r;
    for (OptBackend b : {OptBackend::kNsLdlt, OptBackend::kScLdlt}) {
      auto est = make_estimator(config(b, MargBackend::kNsQr), w);
      const auto sys = est.linearize_reduced(b);
      VecXd dx;
      ASSERT_TRUE(est.solve_rcs(sys, 0.0, dx));
      EXPECT_LE(oracle::rel_err(dx, ref.head(dx.size())), 1e-8);
      for (const auto& [id, d] : est.back_substitute(sys, dx)) {
        const Vec3<double> r3 = ref.segment<3>(js.lm_col.at(id));
        EXPECT_LE((d - r3).norm(), 1e-8 * std::max(1.0, r3.norm())) << to_string(b);
      }
    }
  }
}

TEST(Optimize, AcceptedEnergiesDecrease) {
  oracle::Rng rng(208);
  for (OptBackend b : {OptBackend::kNsLdlt, OptBackend::kScLdlt}) {
    auto est = make_estimator(config(b, MargBackend::kNsQr), anchored_window(rng, 5, 10, 2.0));
    const auto rep = est.optimize();
    EXPECT_FALSE(rep.failed);
    EXPECT_LE(rep.final_energy, rep.initial_energy);
    double last = rep.initial_energy;
    for (const auto& s : est.steps()) {
      if (!s.accepted) continue;
      EXPECT_LT(s.energy_after, s.energy_before);
      EXPECT_LE(s.energy_after, last);
      last = s.energy_after;
    }
  }
}

TEST(Optimize, ConvergedWindowStaysPut) {
  oracle::Rng rng(209);
  const auto w = anchored_window(rng, 4, 6, 0.0);
  auto est = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kNsQr), w);
  const auto rep = est.optimize();
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.final_energy, rep.initial_energy);
  EXPECT_LE(rep.iterations, 2);
  for (std::size_t i = 0; i < w.frames.size(); ++i) {
    EXPECT_LE((est.problem().frames[i].pose.t - w.frames[i].pose.t).norm(), 1e-9);
  }
}

TEST(Optimize, NoiseFreeWindowReachesGroundTruth) {
  oracle::Rng rng(210);
  for (OptBackend b : {OptBackend::kNsLdlt, OptBackend::kScLdlt}) {
    const auto truth = anchored_window(rng, 5, 12, 0.0);
    auto w = truth;
    for (std::size_t i = 1; i < w.frames.size(); ++i) {
      Vec6<double> d;
      for (int k = 0; k < 6; ++k) d(k) = 0.02 * rng.normal();
      w.frames[i].pose = box_plus(w.frames[i].pose, d);
    }
    for (auto& [id, lm] : w.landmarks) lm.param.z() *= 1.0 + 0.05 * rng.uniform(-1, 1);
    auto c = config(b, MargBackend::kNsQr);
    c.lm.max_iterations = 50;
    c.lm.function_tolerance = 1e-16;
    auto est = make_estimator(c, w);
    const auto rep = est.optimize();
    EXPECT_FALSE(rep.failed);
    for (std::size_t i = 0; i < w.frames.size(); ++i) {
      const auto& p = est.problem().frames[i].pose;
      EXPECT_LE((p.t - truth.frames[i].pose.t).norm(), 1e-6) << to_string(b);
      EXPECT_LE(so3_log<double>(Eigen::Matrix3d(truth.frames[i].pose.rotation().transpose() * p.rotation())).norm(),
                1e-6);
    }
  }
}

TEST(MarginalizeFrame, BackendsGiveGramEquivalentPriors) {
  oracle::Rng rng(211);
  for (int t = 0; t < 20; ++t) {
    const auto w = anchored_window(rng, 4, 6, 0.5);
    auto qr = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kNsQr), w);
    auto sc = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kScSc), w);
    const auto dq = qr.marginalize_frame();
    const auto ds = sc.marginalize_frame();
    const auto& pq = qr.problem().prior;
    const auto& ps = sc.problem().prior;
    EXPECT_EQ(pq.form, PriorForm::kSqrt);
    EXPECT_EQ(ps.form, PriorForm::kSquared);
    EXPECT_EQ(pq.frame_ids, ps.frame_ids);
    const MatXd h = ps.hessian();
    EXPECT_LE((pq.hessian() - h).norm(), 50 * kEps * h.norm());
    EXPECT_LE((pq.gradient() - ps.gradient()).norm(), 50 * kEps * std::max(ps.gradient().norm(), h.norm()));
    EXPECT_EQ(dq.marginalized_landmarks, 6);
    EXPECT_EQ(ds.marginalized_landmarks, 6);
    EXPECT_EQ(qr.problem().frames.size(), 3u);
    EXPECT_TRUE(qr.problem().landmarks.empty());
  }
}

// Only the previous prior touches the marginalized frame: the new prior is
// the Schur complement of that prior alone.
TEST(MarginalizeFrame, PriorOnlyWindowMatchesDenseSchur) {
  oracle::Rng rng(212);
  for (MargBackend mb : {MargBackend::kNsQr, MargBackend::kScSc}) {
    WindowProblem<double> w;
    w.rig = StereoRig<double>::make(400, 0.3);
    MarginalizationPrior<double> p;
    p.form = PriorForm::kSqrt;
    for (int i = 0; i < 3; ++i) {
      w.frames.push_back(fixtures::frame(i, fixtures::random_pose(rng)));
      w.frames.back().freeze();
      p.frame_ids.push_back(i);
      p.lin_points.push_back({w.frames.back().lin, Vec6<double>::Zero()});
    }
    p.j = rng.gaussian(18, 18);
    p.r = rng.gaussian(18);
    w.prior = mb == MargBackend::kNsQr ? p : squared_from_sqrt(p);
    auto est = make_estimator(config(OptBackend::kNsLdlt, mb), w);
    est.marginalize_frame();
    const auto ref = oracle::schur_brute_force(p.j, p.r, 6);
    const auto& np = est.problem().prior;
    ASSERT_EQ(np.frame_ids, (std::vector<FrameId>{1, 2}));
    EXPECT_LE(oracle::rel_err(np.hessian(), ref.h), 1e-12);
    EXPECT_LE(oracle::rel_err(np.gradient(), ref.b), 1e-11);
  }
}

TEST(MarginalizeFrame, FirstPriorKeepsGaugeNullspace) {
  oracle::Rng rng(213);
  for (GaugeMode mode : {GaugeMode::kVoLike, GaugeMode::kVioLike}) {
    for (MargBackend mb : {MargBackend::kNsQr, MargBackend::kScSc}) {
      auto w = anchored_window(rng, 4, 8, 0.0);
      if (mode == GaugeMode::kVoLike) {
        std::erase_if(w.residuals, [](const ResidualBlock<double>& b) { return b.kind == ResidualKind::kRelativeMotion; });
      }
      auto est = make_estimator(config(OptBackend::kNsLdlt, mb, mode), w);
      est.marginalize_frame();
      const MatXd h = est.problem().prior.hessian();
      const Index deficiency = h.rows() - oracle::svd_rank(h, 1e-9);
      EXPECT_GE(deficiency, gauge_dof(mode)) << to_string(mode) << " " << to_string(mb);
    }
  }
}

TEST(MarginalizeFrame, FrozenLinearizationPointsNeverMove) {
  oracle::Rng rng(214);
  auto est = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kNsQr), anchored_window(rng, 5, 10, 1.0));
  est.optimize();
  est.marginalize_frame();
  std::map<FrameId, Pose<double>> lin;
  for (const auto& f : est.problem().frames) {
    if (f.frozen) lin[f.id] = f.lin;
  }
  ASSERT_FALSE(lin.empty());
  est.problem().frames[1].apply_increment(Vec6<double>::Constant(1e-3));
  est.optimize();
  for (const auto& f : est.problem().frames) {
    if (!f.frozen) continue;
    EXPECT_EQ(f.lin.q.coeffs(), lin.at(f.id).q.coeffs());
    EXPECT_EQ(f.lin.t, lin.at(f.id).t);
  }
}

TEST(MarginalizeFrame, NeedsTwoFrames) {
  oracle::Rng rng(215);
  auto est = make_estimator(config(OptBackend::kNsLdlt, MargBackend::kNsQr), anchored_window(rng, 1, 2, 0.0));
  EXPECT_THROW(est.marginalize_frame(), Error);
}

TEST(SolverConfig, RejectsInvalidSettings) {
  SolverConfig c;
  c.window_size = 1;
  EXPECT_THROW(c.validate(), Error);
  c = SolverConfig();
  c.lm.initial_lambda = 0;
  EXPECT_THROW(c.validate(), Error);
  c = SolverConfig();
  c.precision = Precision::kSingle;
  EXPECT_THROW(SlidingWindowEstimator<double>(c, StereoRig<double>::make(400, 0.3)), Error);
}
