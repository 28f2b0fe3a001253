#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "swba/estimator/estimator.hpp"
#include "swba/eval/ate.hpp"
#include "swba/harness/run_config.hpp"
#include "swba/io/text_io.hpp"
#include "swba/sim/world.hpp"

namespace swba {

/// A run is marked failed when its ATE exceeds this multiple of the best
/// double-precision ATE (floored by kAteFailureFloor).
inline constexpr double kAteFailureFactor = 10.0;
inline constexpr double kAteFailureFloor = 1e-3;

struct VariantResult {
  VariantSpec spec;
  bool failed = false;
  std::string failure_reason;
  /// Marginalization event at which the run stopped, if it diverged.
  std::optional<Index> failure_event;
  std::vector<TrajectoryEntry> trajectory;
  std::vector<DiagnosticsRecord> diagnostics;
  std::vector<std::string> event_lines;
  double ate = std::numeric_limits<double>::quiet_NaN();
  PhaseTimes times;
  Index frames_processed = 0;
};

struct ExperimentReport {
  std::vector<VariantResult> results;
  std::optional<double> best_double_ate;
  std::string table;
  std::string timing_table;
};

namespace detail {

inline nlohmann::json step_json(const StepReport& s) {
  return {{"type", "lm_step"},          {"frame", s.frame},
          {"iteration", s.iteration},   {"accepted", s.accepted},
          {"factorization_failed", s.factorization_failed},
          {"energy_before", s.energy_before}, {"energy_after", s.energy_after},
          {"lambda", s.lambda}};
}

inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
}

inline nlohmann::json marg_json(const DiagnosticsRecord& d) {
  nlohmann::json probes;
  for (int i = 0; i < kNumProbes; ++i) probes[std::string(kProbeNames[i])] = json_number(d.probes[i]);
  return {{"type", "marginalization"},
          {"event", d.event_index},
          {"frame", d.marginalized_frame},
          {"sigma_min", d.sigma_min ? json_number(*d.sigma_min) : nlohmann::json(nullptr)},
          {"probes", probes},
          {"prior_rank", d.prior_rank},
          {"rank_gap", d.rank_gap},
          {"dropped_observations", d.dropped_observations},
          {"marginalized_landmarks", d.marginalized_landmarks}};
}

template <typename Scalar>
VariantResult run_variant_impl(const SyntheticWorld& world, const RunConfig& cfg,
                               const VariantSpec& spec) {
  VariantResult res;
  res.spec = spec;
  SolverConfig sc = cfg.solver;
  sc.opt_backend = spec.opt;
  sc.marg_backend = spec.marg;
  sc.precision = spec.precision;
  sc.noise = weights_for_world(world.params);
  SlidingWindowEstimator<Scalar> est(sc, world.rig, cfg.seed());

  // Same perturbation sequence for every variant.
  std::mt19937_64 rng(cfg.seed() ^ 0xA5A5A5A5DEADBEEFULL);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::size_t steps_seen = 0;
  try {
    for (const auto& m : world.frames) {
      Vec6<double> noise;
      for (int i = 0; i < 3; ++i) noise(i) = cfg.init_trans_perturbation * n01(rng);
      for (int i = 3; i < 6; ++i) noise(i) = cfg.init_rot_perturbation * n01(rng);
      Pose<double> init;
      if (est.problem().frames.empty()) {
        init = world.trajectory[static_cast<std::size_t>(m.id)];
      } else {
        const Pose<double> prev = est.problem().frames.back().pose.template cast<double>();
        init = box_plus(prev * m.odometry, noise);
      }
      std::optional<DiagnosticsRecord> rec;
      const OptimizeReport rep = est.process_frame(m, init, &rec);
      ++res.frames_processed;
      const auto& steps = est.steps();
      for (; steps_seen < steps.size(); ++steps_seen) {
        res.event_lines.push_back(step_json(steps[steps_seen]).dump());
      }
      if (rec) {
        res.diagnostics.push_back(*rec);
        res.event_lines.push_back(marg_json(*rec).dump());
      }
      if (rep.failed) {
        res.failed = true;
        res.failure_reason = rep.failure;
        res.failure_event = est.event_count();
        break;
      }
    }
  } catch (const std::exception& e) {
    res.failed = true;
    res.failure_reason = std::string("exception: ") + e.what();
    res.failure_event = est.event_count();
  }
  if (res.failed) {
    res.event_lines.push_back(nlohmann::json{{"type", "failure"},
                                             {"event", *res.failure_event},
                                             {"reason", res.failure_reason}}
                                  .dump());
  }
  res.trajectory = est.trajectory();
  res.times = est.times();

  std::vector<Pose<double>> e, g;
  for (const auto& t : res.trajectory) {
    e.push_back(t.pose);
    g.push_back(world.trajectory[static_cast<std::size_t>(t.id)]);
  }
  if (e.size() >= 3) {
    bool finite = true;
    for (const auto& p : e) finite = finite && p.t.allFinite() && p.q.coeffs().allFinite();
    if (finite) res.ate = ate_rmse(e, g);
  }
  if (!std::isfinite(res.ate) && !res.failed) {
    res.failed = true;
    res.failure_reason = "non-finite trajectory";
    res.failure_event = est.event_count();
  }
  return res;
}

inline std::string fmt_fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*e", prec, v);
  return buf;
}

}  // namespace detail

inline VariantResult run_variant(const SyntheticWorld& world, const RunConfig& cfg,
                                 const VariantSpec& spec) {
  if (spec.precision == Precision::kSingle) return detail::run_variant_impl<float>(world, cfg, spec);
  return detail::run_variant_impl<double>(world, cfg, spec);
}

/// Applies the cross-variant ATE failure rule and builds the summary tables.
inline void finalize_report(ExperimentReport& rep) {
  for (const auto& r : rep.results) {
    if (r.spec.precision == Precision::kDouble && !r.failed && std::isfinite(r.ate)) {
      rep.best_double_ate = rep.best_double_ate ? std::min(*rep.best_double_ate, r.ate) : r.ate;
    }
  }
  if (rep.best_double_ate) {
    const double limit = kAteFailureFactor * std::max(*rep.best_double_ate, kAteFailureFloor);
    for (auto& r : rep.results) {
      if (!r.failed && r.ate > limit) {
        r.failed = true;
        r.failure_reason = "ATE exceeds " + format_double(kAteFailureFactor) +
                           "x the best double-precision ATE";
      }
    }
  }

  // Rows: backend pairs; columns: precision.
  std::string t = "opt      marg   double        single\n";
  std::string tt = "variant                      optimization_s  marginalization_s\n";
  for (OptBackend o : {OptBackend::kNsLdlt, OptBackend::kScLdlt}) {
    for (MargBackend m : {MargBackend::kNsQr, MargBackend::kScSc}) {
      char head[32];
      std::snprintf(head, sizeof(head), "%-8s %-6s", std::string(to_string(o)).c_str(),
                    std::string(to_string(m)).c_str());
      t += head;
      for (Precision p : {Precision::kDouble, Precision::kSingle}) {
        std::string cell = "-";
        for (const auto& r : rep.results) {
          if (r.spec == VariantSpec{o, m, p}) cell = r.failed ? "x" : detail::fmt_fixed(r.ate, 4);
        }
        char c[32];
        std::snprintf(c, sizeof(c), " %-13s", cell.c_str());
        t += c;
      }
      while (!t.empty() && t.back() == ' ') t.pop_back();
      t += "\n";
    }
  }
  for (const auto& r : rep.results) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-28s %-15.6f %.6f\n", r.spec.name().c_str(),
                  r.times.optimization_s, r.times.marginalization_s);
    tt += line;
  }
  rep.table = t;
  rep.timing_table = tt;
}

inline nlohmann::json summary_json(const VariantResult& r, const RunConfig& cfg) {
  nlohmann::json j;
  j["variant"] = r.spec.name();
  j["opt_backend"] = std::string(to_string(r.spec.opt));
  j["marg_backend"] = std::string(to_string(r.spec.marg));
  j["precision"] = std::string(to_string(r.spec.precision));
  j["gauge_mode"] = std::string(to_string(cfg.solver.gauge_mode));
  j["noise_free"] = cfg.world.pixel_noise == 0 && cfg.world.motion_trans_noise == 0 &&
                    cfg.world.motion_rot_noise == 0 && cfg.world.gravity_noise == 0;
  j["seed"] = cfg.seed();
  j["preset"] = std::string(to_string(cfg.world.preset));
  j["frames_processed"] = r.frames_processed;
  j["marginalization_events"] = r.diagnostics.size();
  j["ate_m"] = detail::json_number(r.ate);
  j["failed"] = r.failed;
  j["failure_reason"] = r.failure_reason;
  j["failure_event"] = r.failure_event ? nlohmann::json(*r.failure_event) : nlohmann::json(nullptr);
  j["timing"] = {{"optimization_s", r.times.optimization_s},
                 {"marginalization_s", r.times.marginalization_s}};
  return j;
}

/// Writes the bundle: per-variant directory with trajectory, diagnostics,
/// events and summary, plus ground truth and cross-variant tables.
inline void write_report(const ExperimentReport& rep, const SyntheticWorld& world,
                         const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  std::vector<StampedPose> gt;
  for (std::size_t i = 0; i < world.trajectory.size(); ++i) {
    gt.push_back({world.timestamps[i], world.trajectory[i]});
  }
  write_text_file((root / "groundtruth.txt").string(), format_trajectory(gt));
  for (const auto& r : rep.results) {
    const fs::path dir = root / r.spec.name();
    fs::create_directories(dir);
    std::vector<StampedPose> traj;
    for (const auto& t : r.trajectory) traj.push_back({t.timestamp, t.pose});
    write_text_file((dir / "trajectory.txt").string(), format_trajectory(traj));
    write_text_file((dir / "diagnostics.csv").string(), format_diagnostics_csv(r.diagnostics));
    std::string ev;
    for (const auto& l : r.event_lines) ev += l + "\n";
    write_text_file((dir / "events.jsonl").string(), ev);
    write_text_file((dir / "summary.json").string(), summary_json(r, cfg).dump(2) + "\n");
  }
  write_text_file((root / "ablation.txt").string(), rep.table);
  write_text_file((root / "timing.txt").string(), rep.timing_table);
}

/// Runs every selected variant on one synthetic world. Variant failures are
/// recorded and the experiment continues.
inline ExperimentReport run_experiment(const RunConfig& cfg, bool write_files = true) {
  cfg.validate();
  ExperimentReport rep;
  if (cfg.variants.empty()) {
    finalize_report(rep);
    return rep;
  }
  const SyntheticWorld world = generate_world(cfg.world);
  for (const auto& v : cfg.variants) rep.results.push_back(run_variant(world, cfg, v));
  finalize_report(rep);
  if (write_files) write_report(rep, world, cfg);
  return rep;
}

}  // namespace swba
