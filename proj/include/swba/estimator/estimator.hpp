#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "swba/estimator/config.hpp"
#include "swba/estimator/landmark_elim.hpp"
#include "swba/estimator/measurements.hpp"
#include "swba/eval/diagnostics.hpp"
#include "swba/geometry/gauge.hpp"
#include "swba/graph/landmark_block.hpp"
#include "swba/marg/marginalize.hpp"

namespace swba {

struct StepReport {
  FrameId frame = 0;
  int iteration = 0;
  bool accepted = false;
  bool factorization_failed = false;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double lambda = 0.0;
};

struct OptimizeReport {
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string failure;
  double initial_energy = 0.0;
  double final_energy = 0.0;
};

struct PhaseTimes {
  double optimization_s = 0.0;
  double marginalization_s = 0.0;
};

struct TrajectoryEntry {
  FrameId id = 0;
  double timestamp = 0.0;
  Pose<double> pose;
};

/// Normal equations of the frame variables after landmark elimination.
template <typename Scalar>
struct ReducedSystem {
  MatX<Scalar> h;
  VecX<Scalar> b;
  std::vector<FrameId> frame_order;
  std::vector<LandmarkBlock<Scalar>> blocks;
  std::vector<ScLandmarkReduction<Scalar>> sc;
  OptBackend backend = OptBackend::kNsLdlt;
};

template <typename Scalar>
class SlidingWindowEstimator {
 public:
  SlidingWindowEstimator(const SolverConfig& config, const StereoRig<double>& rig,
                         std::uint64_t probe_seed = 0)
      : config_(config), probe_seed_(probe_seed) {
    config_.validate();
    if (precision_of<Scalar>() != config_.precision) {
      throw Error("estimator: scalar type does not match configured precision");
    }
    problem_.rig = rig.template cast<Scalar>();
  }

  const SolverConfig& config() const { return config_; }
  const WindowProblem<Scalar>& problem() const { return problem_; }
  WindowProblem<Scalar>& problem() { return problem_; }
  const std::vector<StepReport>& steps() const { return steps_; }
  const PhaseTimes& times() const { return times_; }
  Index event_count() const { return event_count_; }

  /// Adds a keyframe, optimizes, and marginalizes the oldest frame when the
  /// window is over capacity.
  OptimizeReport process_frame(const FrameMeasurements& m, const Pose<double>& initial_pose,
                               std::optional<DiagnosticsRecord>* marg_record = nullptr) {
    add_frame(m, initial_pose);
    OptimizeReport rep = optimize();
    if (!rep.failed && static_cast<int>(problem_.frames.size()) > config_.window_size) {
      DiagnosticsRecord d = marginalize_frame();
      if (marg_record) *marg_record = d;
    }
    return rep;
  }

  void add_frame(const FrameMeasurements& m, const Pose<double>& initial_pose) {
    if (problem_.frame_index(m.id) >= 0) throw Error("estimator: duplicate frame id");
    const bool first = problem_.frames.empty();
    FrameState<Scalar> f;
    f.id = m.id;
    f.timestamp = m.timestamp;
    f.pose = initial_pose.template cast<Scalar>();
    const FrameId prev = first ? -1 : problem_.frames.back().id;
    problem_.frames.push_back(f);

    if (!first && m.has_odometry && config_.gauge_mode == GaugeMode::kVioLike) {
      ResidualBlock<Scalar> rb;
      rb.kind = ResidualKind::kRelativeMotion;
      rb.frames = {prev, m.id};
      const Index dim = m.has_gravity ? 9 : 6;
      VecXd meas(dim);
      meas.head<6>() = pose_measurement(m.odometry);
      VecXd w(dim);
      w.head<3>().setConstant(1.0 / config_.noise.odom_trans_sigma);
      w.segment<3>(3).setConstant(1.0 / config_.noise.odom_rot_sigma);
      if (m.has_gravity) {
        meas.tail<3>() = m.gravity;
        w.tail<3>().setConstant(1.0 / config_.noise.gravity_sigma);
      }
      rb.measurement = meas.cast<Scalar>();
      rb.weight_sqrt = w.cast<Scalar>().asDiagonal();
      problem_.residuals.push_back(std::move(rb));
    }

    for (TrackId t : m.lost_tracks) {
      auto it = track_to_landmark_.find(t);
      if (it != track_to_landmark_.end()) {
        problem_.landmarks.at(it->second).lost = true;
        track_to_landmark_.erase(it);
      }
    }

    std::map<TrackId, std::array<const StereoObservation*, 2>> by_track;
    for (const auto& o : m.observations) {
      if (o.camera < 0 || o.camera > 1) throw Error("estimator: camera index out of range");
      auto& slot = by_track[o.track];
      slot[o.camera] = &o;
    }
    const Scalar w_px = Scalar(1.0 / config_.noise.pixel_sigma);
    for (const auto& [track, obs] : by_track) {
      auto it = track_to_landmark_.find(track);
      LandmarkId lid;
      if (it != track_to_landmark_.end()) {
        lid = it->second;
      } else {
        if (!obs[0] || !obs[1]) continue;
        Landmark<Scalar> lm;
        lm.id = lid = next_landmark_id_++;
        lm.host = m.id;
        lm.param = triangulate(obs[0]->pixel, obs[1]->pixel);
        problem_.landmarks[lid] = lm;
        track_to_landmark_[track] = lid;
      }
      for (int c = 0; c < 2; ++c) {
        if (!obs[c]) continue;
        ResidualBlock<Scalar> rb;
        rb.kind = ResidualKind::kReprojection;
        rb.frames = {m.id};
        rb.landmark = lid;
        rb.camera = c;
        rb.measurement = obs[c]->pixel.template cast<Scalar>();
        rb.weight_sqrt = MatX<Scalar>::Identity(2, 2) * w_px;
        problem_.residuals.push_back(std::move(rb));
      }
    }
    if (first) anchor_gauge_prior();
  }

  /// Linearizes all residuals and eliminates landmarks with the given backend.
  ReducedSystem<Scalar> linearize_reduced(OptBackend backend) const {
    ReducedSystem<Scalar> sys;
    sys.backend = backend;
    sys.frame_order = problem_.frame_ids();
    const Index n = kPoseDim * static_cast<Index>(sys.frame_order.size());
    sys.h = MatX<Scalar>::Zero(n, n);
    sys.b = VecX<Scalar>::Zero(n);
    std::map<FrameId, Index> pos;
    for (std::size_t i = 0; i < sys.frame_order.size(); ++i) pos[sys.frame_order[i]] = i;

    sys.blocks = assemble_landmark_blocks(problem_, sys.frame_order);
    if (backend == OptBackend::kScLdlt) sys.sc.reserve(sys.blocks.size());
    for (auto& blk : sys.blocks) {
      const Index np = blk.landmark_col();
      MatX<Scalar> g;
      VecX<Scalar> gb;
      if (backend == OptBackend::kNsLdlt) {
        ns_project_landmark(blk, config_.zero_tol_factor);
        const Index k = blk.retained_rows;
        const Index m = blk.rows() - k;
        const auto p = blk.storage.bottomRows(m);
        g = p.leftCols(np).transpose() * p.leftCols(np);
        gb = p.leftCols(np).transpose() * p.col(blk.res_col());
      } else {
        sys.sc.push_back(sc_reduce_landmark(blk));
        g = sys.sc.back().h_red;
        gb = sys.sc.back().b_red;
      }
      scatter(sys, pos, blk.frames, g, gb);
    }

    for (const auto& rb : problem_.residuals) {
      if (rb.kind == ResidualKind::kReprojection) continue;
      const ResidualEval<Scalar> ev = evaluate_residual(rb, problem_);
      if (!ev.valid) continue;
      const Index m = ev.r.size();
      MatX<Scalar> j(m, kPoseDim * static_cast<Index>(ev.frame_ids.size()));
      for (std::size_t k = 0; k < ev.frame_ids.size(); ++k) {
        j.middleCols(kPoseDim * k, kPoseDim) = ev.frame_jacs[k];
      }
      scatter(sys, pos, ev.frame_ids, MatX<Scalar>(j.transpose() * j),
              VecX<Scalar>(j.transpose() * ev.r));
    }

    const auto& pr = problem_.prior;
    if (!pr.empty()) {
      const VecX<Scalar> d = prior_delta(pr, frame_offsets(problem_));
      MatX<Scalar> hp;
      VecX<Scalar> bp;
      if (pr.form == PriorForm::kSqrt) {
        const VecX<Scalar> r = pr.r + pr.j * d;
        hp = pr.j.transpose() * pr.j;
        bp = pr.j.transpose() * r;
      } else {
        hp = pr.h;
        bp = pr.b + pr.h * d;
      }
      scatter(sys, pos, pr.frame_ids, hp, bp);
    }
    return sys;
  }

  /// Solves (H + lambda D) dx = -b with D = diag(H) (floored). Returns false
  /// if the factorization fails or the damped matrix is not positive definite.
  bool solve_rcs(const ReducedSystem<Scalar>& sys, double lambda, VecX<Scalar>& dx) const {
    const Index n = sys.h.rows();
    if (n == 0) {
      dx.resize(0);
      return true;
    }
    MatX<Scalar> hd = sys.h;
    for (Index i = 0; i < n; ++i) {
      hd(i, i) += Scalar(lambda) * std::max(sys.h(i, i), Scalar(kMinDampingDiag));
    }
    Eigen::LDLT<MatX<Scalar>> ldlt(hd);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > Scalar(0)).all()) {
      return false;
    }
    dx = ldlt.solve(-sys.b);
    return dx.allFinite();
  }

  /// Landmark increments for a frame increment (landmark id -> increment).
  std::map<LandmarkId, Vec3<Scalar>> back_substitute(const ReducedSystem<Scalar>& sys,
                                                     const VecX<Scalar>& dx) const {
    std::map<FrameId, Index> pos;
    for (std::size_t i = 0; i < sys.frame_order.size(); ++i) pos[sys.frame_order[i]] = i;
    std::map<LandmarkId, Vec3<Scalar>> out;
    for (std::size_t i = 0; i < sys.blocks.size(); ++i) {
      const auto& blk = sys.blocks[i];
      VecX<Scalar> dxb(blk.landmark_col());
      for (std::size_t s = 0; s < blk.frames.size(); ++s) {
        dxb.template segment<kPoseDim>(kPoseDim * s) =
            dx.template segment<kPoseDim>(kPoseDim * pos.at(blk.frames[s]));
      }
      out[blk.landmark] = sys.backend == OptBackend::kNsLdlt
                              ? ns_back_substitute(blk, dxb)
                              : sc_back_substitute(sys.sc[i], dxb);
    }
    return out;
  }

  /// Levenberg-Marquardt on the current window.
  OptimizeReport optimize() {
    const auto t0 = std::chrono::steady_clock::now();
    OptimizeReport rep;
    const FrameId fid = problem_.frames.empty() ? -1 : problem_.frames.back().id;
    double lambda = config_.lm.initial_lambda;
    double e = total_energy(problem_);
    rep.initial_energy = e;
    if (!std::isfinite(e)) {
      rep.failed = true;
      rep.failure = "non-finite energy";
    }
    ReducedSystem<Scalar> sys;
    bool relinearize = true;
    while (!rep.failed && rep.iterations < config_.lm.max_iterations) {
      if (e == 0.0) {
        rep.converged = true;
        break;
      }
      if (relinearize) {
        sys = linearize_reduced(config_.opt_backend);
        relinearize = false;
      }
      ++rep.iterations;
      StepReport step;
      step.frame = fid;
      step.iteration = rep.iterations;
      step.lambda = lambda;
      step.energy_before = e;

      VecX<Scalar> dx;
      if (!solve_rcs(sys, lambda, dx)) {
        step.factorization_failed = true;
        step.energy_after = e;
        steps_.push_back(step);
        if (lambda >= config_.lm.max_lambda) {
          rep.failed = true;
          rep.failure = "reduced system factorization failed at maximum damping";
          break;
        }
        lambda = std::min(lambda * config_.lm.lambda_up, config_.lm.max_lambda);
        continue;
      }
      if (static_cast<double>(dx.template lpNorm<Eigen::Infinity>()) <= config_.lm.parameter_tolerance) {
        step.energy_after = e;
        steps_.push_back(step);
        rep.converged = true;
        break;
      }
      const auto dl = back_substitute(sys, dx);
      const auto saved_frames = problem_.frames;
      std::map<LandmarkId, Vec3<Scalar>> saved_lms;
      for (const auto& [id, lm] : problem_.landmarks) saved_lms[id] = lm.param;
      apply_increment(sys.frame_order, dx, dl);
      const double e1 = total_energy(problem_);
      step.energy_after = e1;
      if (std::isfinite(e1) && e1 < e) {
        step.accepted = true;
        steps_.push_back(step);
        const double rel = (e - e1) / e;
        e = e1;
        lambda = std::max(lambda / config_.lm.lambda_down, config_.lm.min_lambda);
        relinearize = true;
        if (rel < config_.lm.function_tolerance) {
          rep.converged = true;
          break;
        }
      } else {
        steps_.push_back(step);
        problem_.frames = saved_frames;
        for (auto& [id, lm] : problem_.landmarks) lm.param = saved_lms.at(id);
        if (!std::isfinite(e1) && lambda >= config_.lm.max_lambda) {
          rep.failed = true;
          rep.failure = "non-finite energy";
          break;
        }
        if (std::isfinite(e1) && std::abs(e1 - e) <= config_.lm.function_tolerance * e) {
          rep.converged = true;
          break;
        }
        if (lambda >= config_.lm.max_lambda) break;
        lambda = std::min(lambda * config_.lm.lambda_up, config_.lm.max_lambda);
      }
    }
    rep.final_energy = e;
    times_.optimization_s +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }

  /// Marginalizes the oldest frame together with the landmarks it hosts and
  /// all lost landmarks.
  DiagnosticsRecord marginalize_frame() {
    if (problem_.frames.size() < 2) throw Error("marginalize_frame: need at least two frames");
    const auto t0 = std::chrono::steady_clock::now();
    DiagnosticsRecord diag;
    diag.event_index = event_count_;
    const FrameId mu = problem_.frames.front().id;
    diag.marginalized_frame = mu;

    std::set<LandmarkId> marg_lms;
    for (const auto& [id, lm] : problem_.landmarks) {
      if (lm.host == mu || lm.lost) marg_lms.insert(id);
    }
    diag.marginalized_landmarks = static_cast<Index>(marg_lms.size());

    // Residual bookkeeping.
    std::vector<std::size_t> pose_rows;
    std::vector<char> remove(problem_.residuals.size(), 0);
    for (std::size_t i = 0; i < problem_.residuals.size(); ++i) {
      const auto& rb = problem_.residuals[i];
      const bool touches_mu = std::find(rb.frames.begin(), rb.frames.end(), mu) != rb.frames.end();
      if (rb.kind == ResidualKind::kReprojection) {
        if (marg_lms.count(rb.landmark)) {
          remove[i] = 1;
        } else if (touches_mu) {
          remove[i] = 1;
          ++diag.dropped_observations;
        }
      } else if (rb.kind == ResidualKind::kAbsolutePrior) {
        if (touches_mu) remove[i] = 1;
      } else if (touches_mu) {
        remove[i] = 1;
        pose_rows.push_back(i);
      }
    }

    // Landmark blocks of marginalized landmarks, in window frame order.
    const std::vector<FrameId> order = problem_.frame_ids();
    const auto groups = residuals_by_landmark(problem_);
    std::vector<LandmarkBlock<Scalar>> blocks;
    for (LandmarkId id : marg_lms) {
      auto it = groups.find(id);
      if (it == groups.end()) continue;
      LandmarkBlock<Scalar> blk;
      if (assemble_landmark_block(problem_, id, it->second, order, blk)) {
        blocks.push_back(std::move(blk));
      }
    }
    std::vector<ResidualEval<Scalar>> pose_evals;
    for (std::size_t i : pose_rows) {
      ResidualEval<Scalar> ev = evaluate_residual(problem_.residuals[i], problem_);
      if (ev.valid) pose_evals.push_back(std::move(ev));
    }

    // Columns: mu first, then kappa in window order.
    std::set<FrameId> touched;
    for (const auto& b : blocks) touched.insert(b.frames.begin(), b.frames.end());
    for (const auto& ev : pose_evals) touched.insert(ev.frame_ids.begin(), ev.frame_ids.end());
    for (FrameId f : problem_.prior.frame_ids) touched.insert(f);
    std::vector<FrameId> kappa;
    for (FrameId f : order) {
      if (f != mu && touched.count(f)) kappa.push_back(f);
    }
    std::map<FrameId, Index> pos;
    pos[mu] = 0;
    for (std::size_t i = 0; i < kappa.size(); ++i) pos[kappa[i]] = i + 1;
    const Index n = kPoseDim * static_cast<Index>(kappa.size() + 1);

    const auto& old = problem_.prior;
    VecX<Scalar> old_d;
    if (!old.empty()) old_d = prior_delta(old, frame_offsets(problem_));

    MarginalizationOutput<Scalar> out;
    MatXd gram;
    if (config_.marg_backend == MargBackend::kNsQr) {
      Index rows = 0;
      for (auto& b : blocks) {
        ns_project_landmark(b, config_.zero_tol_factor);
        rows += b.projected_rows();
      }
      for (const auto& ev : pose_evals) rows += ev.r.size();
      MarginalizationPrior<Scalar> old_sqrt = old;
      if (old.form == PriorForm::kSquared) old_sqrt = sqrt_from_squared(old).prior;
      if (!old.empty()) rows += old_sqrt.j.rows();

      MarginalizationInput<Scalar> in;
      in.jac = MatX<Scalar>::Zero(rows, n);
      in.res = VecX<Scalar>::Zero(rows);
      in.n_mu = kPoseDim;
      in.kappa_index = kappa;
      Index row = 0;
      for (const auto& b : blocks) {
        const Index k = b.retained_rows;
        const Index m = b.projected_rows();
        for (std::size_t s = 0; s < b.frames.size(); ++s) {
          in.jac.block(row, kPoseDim * pos.at(b.frames[s]), m, kPoseDim) =
              b.storage.block(k, kPoseDim * s, m, kPoseDim);
        }
        in.res.segment(row, m) = b.storage.block(k, b.res_col(), m, 1);
        row += m;
      }
      for (const auto& ev : pose_evals) {
        const Index m = ev.r.size();
        for (std::size_t s = 0; s < ev.frame_ids.size(); ++s) {
          in.jac.block(row, kPoseDim * pos.at(ev.frame_ids[s]), m, kPoseDim) += ev.frame_jacs[s];
        }
        in.res.segment(row, m) = ev.r;
        row += m;
      }
      if (!old.empty()) {
        const Index m = old_sqrt.j.rows();
        for (std::size_t s = 0; s < old_sqrt.frame_ids.size(); ++s) {
          in.jac.block(row, kPoseDim * pos.at(old_sqrt.frame_ids[s]), m, kPoseDim) =
              old_sqrt.j.middleCols(kPoseDim * s, kPoseDim);
        }
        in.res.segment(row, m) = old_sqrt.r + old_sqrt.j * old_d;
        row += m;
      }
      const MatXd jd = in.jac.template cast<double>();
      gram = jd.transpose() * jd;
      out = marginalize_qr(in, config_.zero_tol_factor);
    } else {
      MatX<Scalar> h = MatX<Scalar>::Zero(n, n);
      VecX<Scalar> b = VecX<Scalar>::Zero(n);
      auto add = [&](const std::vector<FrameId>& fr, const MatX<Scalar>& hh, const VecX<Scalar>& bb) {
        for (std::size_t a = 0; a < fr.size(); ++a) {
          const Index ia = kPoseDim * pos.at(fr[a]);
          b.template segment<kPoseDim>(ia) += bb.template segment<kPoseDim>(kPoseDim * a);
          for (std::size_t c = 0; c < fr.size(); ++c) {
            const Index ic = kPoseDim * pos.at(fr[c]);
            h.template block<kPoseDim, kPoseDim>(ia, ic) +=
                hh.template block<kPoseDim, kPoseDim>(kPoseDim * a, kPoseDim * c);
          }
        }
      };
      for (const auto& blk : blocks) {
        const ScLandmarkReduction<Scalar> red = sc_reduce_landmark(blk);
        add(blk.frames, red.h_red, red.b_red);
      }
      for (const auto& ev : pose_evals) {
        MatX<Scalar> j(ev.r.size(), kPoseDim * static_cast<Index>(ev.frame_ids.size()));
        for (std::size_t s = 0; s < ev.frame_ids.size(); ++s) {
          j.middleCols(kPoseDim * s, kPoseDim) = ev.frame_jacs[s];
        }
        add(ev.frame_ids, j.transpose() * j, j.transpose() * ev.r);
      }
      if (!old.empty()) {
        if (old.form == PriorForm::kSquared) {
          add(old.frame_ids, old.h, old.b + old.h * old_d);
        } else {
          add(old.frame_ids, old.j.transpose() * old.j,
              old.j.transpose() * (old.r + old.j * old_d));
        }
      }
      gram = h.template cast<double>();
      out = marginalize_sc_hessian<Scalar>(h, b, kPoseDim, true, kappa);
    }
    diag.rank_gap = rank_gap_from_gram(gram, kPoseDim);

    // New prior: expansion point at the current offsets of the (now frozen)
    // kappa frames, then shifted to offset zero.
    MarginalizationPrior<Scalar> prior = std::move(out.prior);
    VecX<Scalar> cur(prior.dim());
    for (std::size_t i = 0; i < kappa.size(); ++i) {
      FrameState<Scalar>& f = problem_.frame(kappa[i]);
      f.freeze();
      prior.lin_points[i] = ChartPoint<Scalar>{f.lin, f.delta};
      cur.template segment<kPoseDim>(kPoseDim * i) = f.delta;
    }
    if (!prior.empty()) prior = shift_prior(prior, VecX<Scalar>(-cur));

    diag.sigma_min = track_sigma_min(prior);
    diag.probes = probe_nullspace(prior, probe_seed_ * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(event_count_) + 1);
    diag.prior_rank = prior.form == PriorForm::kSqrt
                          ? prior.j.rows()
                          : (prior.empty() ? 0 : gram_rank(prior.hessian().template cast<double>()));

    // Remove marginalized states.
    const FrameState<Scalar>& fmu = problem_.frames.front();
    trajectory_.push_back({fmu.id, fmu.timestamp, fmu.pose.template cast<double>()});
    std::vector<ResidualBlock<Scalar>> kept;
    kept.reserve(problem_.residuals.size());
    for (std::size_t i = 0; i < problem_.residuals.size(); ++i) {
      if (!remove[i]) kept.push_back(std::move(problem_.residuals[i]));
    }
    problem_.residuals = std::move(kept);
    for (LandmarkId id : marg_lms) problem_.landmarks.erase(id);
    for (auto it = track_to_landmark_.begin(); it != track_to_landmark_.end();) {
      it = marg_lms.count(it->second) ? track_to_landmark_.erase(it) : std::next(it);
    }
    problem_.frames.erase(problem_.frames.begin());
    problem_.prior = std::move(prior);
    anchor_gauge_prior();

    ++event_count_;
    times_.marginalization_s +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return diag;
  }

  /// Final estimates: marginalized frames followed by the current window.
  std::vector<TrajectoryEntry> trajectory() const {
    std::vector<TrajectoryEntry> out = trajectory_;
    for (const auto& f : problem_.frames) {
      out.push_back({f.id, f.timestamp, f.pose.template cast<double>()});
    }
    return out;
  }

  /// Re-anchors the gauge-fixing pose prior on the oldest window frame.
  void anchor_gauge_prior() {
    auto& res = problem_.residuals;
    res.erase(std::remove_if(res.begin(), res.end(),
                             [](const ResidualBlock<Scalar>& r) {
                               return r.kind == ResidualKind::kAbsolutePrior;
                             }),
              res.end());
    if (problem_.frames.empty()) return;
    const FrameState<Scalar>& f = problem_.frames.front();
    ResidualBlock<Scalar> rb;
    rb.kind = ResidualKind::kAbsolutePrior;
    rb.frames = {f.id};
    rb.measurement = pose_measurement(f.pose);
    const Scalar w = Scalar(config_.gauge_prior_weight);
    if (config_.gauge_mode == GaugeMode::kVoLike) {
      rb.weight_sqrt = w * MatX<Scalar>::Identity(6, 6);
    } else {
      const Pose<double> p = f.jacobian_pose().template cast<double>();
      Eigen::Matrix<double, 6, 4> g;
      g.col(0) = gauge_tangent(p, GaugeDirection::kTx);
      g.col(1) = gauge_tangent(p, GaugeDirection::kTy);
      g.col(2) = gauge_tangent(p, GaugeDirection::kTz);
      g.col(3) = gauge_tangent(p, GaugeDirection::kYaw);
      const Eigen::Matrix<double, 6, 4> q =
          Eigen::HouseholderQR<Eigen::Matrix<double, 6, 4>>(g).householderQ() *
          Eigen::Matrix<double, 6, 4>::Identity();
      MatXd wm = MatXd::Zero(6, 6);
      wm.topRows(4) = q.transpose();
      rb.weight_sqrt = (double(w) * wm).cast<Scalar>();
    }
    res.push_back(std::move(rb));
  }

 private:
  static constexpr double kMinDampingDiag = 1e-6;

  /// Rectified stereo triangulation in the host left camera.
  Vec3<Scalar> triangulate(const Eigen::Vector2d& left, const Eigen::Vector2d& right) const {
    const auto& c0 = problem_.rig.cams[0];
    const auto& c1 = problem_.rig.cams[1];
    const double baseline = static_cast<double>((c1.t_body_cam.t - c0.t_body_cam.t).norm());
    const double fx = c0.fx, fy = c0.fy;
    const double disparity = left.x() - right.x();
    const double rho = std::max(disparity / (fx * baseline), 1e-3);
    return Vec3<Scalar>(Scalar((left.x() - c0.cx) / fx), Scalar((left.y() - c0.cy) / fy), Scalar(rho));
  }

  static void scatter(ReducedSystem<Scalar>& sys, const std::map<FrameId, Index>& pos,
                      const std::vector<FrameId>& frames, const MatX<Scalar>& g,
                      const VecX<Scalar>& gb) {
    for (std::size_t a = 0; a < frames.size(); ++a) {
      const Index ia = kPoseDim * pos.at(frames[a]);
      sys.b.template segment<kPoseDim>(ia) += gb.template segment<kPoseDim>(kPoseDim * a);
      for (std::size_t c = 0; c < frames.size(); ++c) {
        const Index ic = kPoseDim * pos.at(frames[c]);
        sys.h.template block<kPoseDim, kPoseDim>(ia, ic) +=
            g.template block<kPoseDim, kPoseDim>(kPoseDim * a, kPoseDim * c);
      }
    }
  }

  void apply_increment(const std::vector<FrameId>& order, const VecX<Scalar>& dx,
                       const std::map<LandmarkId, Vec3<Scalar>>& dl) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      problem_.frame(order[i]).apply_increment(dx.template segment<kPoseDim>(kPoseDim * i));
    }
    for (const auto& [id, d] : dl) {
      Vec3<Scalar>& p = problem_.landmarks.at(id).param;
      p += d;
      p.z() = std::max(p.z(), Scalar(kMinInverseDepth));
    }
  }

  SolverConfig config_;
  std::uint64_t probe_seed_ = 0;
  WindowProblem<Scalar> problem_;
  std::map<TrackId, LandmarkId> track_to_landmark_;
  LandmarkId next_landmark_id_ = 0;
  std::vector<StepReport> steps_;
  std::vector<TrajectoryEntry> trajectory_;
  PhaseTimes times_;
  Index event_count_ = 0;
};

}  // namespace swba
