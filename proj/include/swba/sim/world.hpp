#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "swba/estimator/measurements.hpp"
#include "swba/geometry/se3.hpp"
#include "swba/graph/types.hpp"

namespace swba {

enum class TrajectoryPreset { kCircle, kFigure8, kRandomWalk };

inline std::string_view to_string(TrajectoryPreset p) {
  switch (p) {
    case TrajectoryPreset::kCircle: return "circle";
    case TrajectoryPreset::kFigure8: return "figure8";
    default: return "randomwalk";
  }
}

inline TrajectoryPreset trajectory_preset_from_string(std::string_view s) {
  if (s == "circle") return TrajectoryPreset::kCircle;
  if (s == "figure8") return TrajectoryPreset::kFigure8;
  if (s == "randomwalk") return TrajectoryPreset::kRandomWalk;
  throw Error("unknown world preset '" + std::string(s) + "'");
}

struct WorldParams {
  std::uint64_t seed = 1;
  TrajectoryPreset preset = TrajectoryPreset::kCircle;
  int num_frames = 100;
  double frame_dt = 0.1;
  /// Distance travelled between keyframes (m).
  double step_length = 0.25;
  /// Size of the circle / figure-eight (m).
  double scale = 6.0;
  /// Landmarks sampled per trajectory frame, at a distance in
  /// [shell_inner, shell_outer] from a random trajectory position.
  double landmarks_per_frame = 40.0;
  double shell_inner = 3.0;
  double shell_outer = 12.0;

  double pixel_noise = 1.0;
  double motion_trans_noise = 0.01;
  double motion_rot_noise = 0.002;
  double gravity_noise = 0.002;

  double mean_track_length = 6.0;
  int max_track_length = 30;
  int max_features = 80;

  double focal = 450.0;
  double baseline = 0.3;
  double min_depth = 1.0;
  double max_depth = 30.0;
  double image_margin = 2.0;

  void validate() const {
    if (num_frames < 1) throw Error("world: num_frames must be >= 1");
    if (!(step_length > 0) || !(scale > 0) || !(frame_dt > 0)) {
      throw Error("world: step length, scale and frame_dt must be positive");
    }
    if (!(landmarks_per_frame > 0) || !(shell_inner > 0) || !(shell_outer > shell_inner)) {
      throw Error("world: invalid landmark shell");
    }
    if (pixel_noise < 0 || motion_trans_noise < 0 || motion_rot_noise < 0 || gravity_noise < 0) {
      throw Error("world: noise levels must be non-negative");
    }
    if (!(mean_track_length >= 1) || max_track_length < 1 || max_features < 1) {
      throw Error("world: invalid track parameters");
    }
    if (!(focal > 0) || !(baseline > 0) || !(min_depth > 0) || !(max_depth > min_depth)) {
      throw Error("world: invalid camera parameters");
    }
  }
};

struct SyntheticWorld {
  WorldParams params;
  StereoRig<double> rig;
  std::vector<Pose<double>> trajectory;
  std::vector<double> timestamps;
  std::vector<Eigen::Vector3d> landmarks;
  std::vector<FrameMeasurements> frames;
  /// Observation -> landmark index (ground truth association).
  std::map<TrackId, std::size_t> track_landmark;
};

namespace detail {

/// Body frame looking along `dir` (camera z), x to the right, y down, with
/// the world z axis up.
inline Pose<double> look_along(const Eigen::Vector3d& pos, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d z = dir.normalized();
  Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
  if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitX();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Mat3<double> r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return Pose<double>(r, pos);
}

/// Samples a parametric curve at equal arc length.
template <typename Curve>
std::vector<Eigen::Vector3d> sample_by_arc_length(const Curve& c, double period, int n,
                                                  double step) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(n + 1);
  const int fine = 20000;
  const double dth = period / fine;
  double th = 0.0;
  Eigen::Vector3d prev = c(0.0);
  out.push_back(prev);
  double acc = 0.0;
  while (static_cast<int>(out.size()) < n + 1) {
    th += dth;
    const Eigen::Vector3d p = c(th);
    const double seg = (p - prev).norm();
    if (acc + seg >= step) {
      const double f = (step - acc) / seg;
      const Eigen::Vector3d q = prev + f * (p - prev);
      out.push_back(q);
      prev = q;
      th -= dth * (1.0 - f);
      acc = 0.0;
    } else {
      acc += seg;
      prev = p;
    }
  }
  return out;
}

inline std::vector<Pose<double>> make_trajectory(const WorldParams& p, std::mt19937_64& rng) {
  const int n = p.num_frames;
  std::vector<Eigen::Vector3d> pts;
  const double r = p.scale;
  switch (p.preset) {
    case TrajectoryPreset::kCircle: {
      auto c = [r](double th) {
        return Eigen::Vector3d(r * std::cos(th), r * std::sin(th), 0.3 * std::sin(3.0 * th));
      };
      pts = sample_by_arc_length(c, 2.0 * M_PI, n, p.step_length);
      break;
    }
    case TrajectoryPreset::kFigure8: {
      auto c = [r](double th) {
        return Eigen::Vector3d(r * std::sin(th), r * std::sin(th) * std::cos(th),
                               0.3 * std::sin(2.0 * th));
      };
      pts = sample_by_arc_length(c, 2.0 * M_PI, n, p.step_length);
      break;
    }
    case TrajectoryPreset::kRandomWalk: {
      std::normal_distribution<double> turn(0.0, 0.08);
      std::normal_distribution<double> climb(0.0, 0.02);
      double heading = 0.0, slope = 0.0;
      Eigen::Vector3d pos = Eigen::Vector3d::Zero();
      pts.push_back(pos);
      for (int k = 0; k < n; ++k) {
        heading += turn(rng);
        slope = std::clamp(0.9 * slope + climb(rng), -0.15, 0.15);
        // Steer back when far from the origin.
        const Eigen::Vector2d to_origin = -pos.head<2>();
        if (to_origin.norm() > r) {
          const double target = std::atan2(to_origin.y(), to_origin.x());
          const double diff = std::remainder(target - heading, 2.0 * M_PI);
          heading += 0.1 * diff;
        }
        Eigen::Vector3d dir(std::cos(heading), std::sin(heading), slope);
        pos += p.step_length * dir.normalized();
        pts.push_back(pos);
      }
      break;
    }
  }
  std::vector<Pose<double>> traj;
  traj.reserve(n);
  for (int k = 0; k < n; ++k) traj.push_back(look_along(pts[k], pts[k + 1] - pts[k]));
  return traj;
}

}  // namespace detail

/// Projects a world point into camera `c` of the rig at `pose`. Returns false
/// when the point is outside the depth range or the image.
inline bool project_world_point(const StereoRig<double>& rig, const WorldParams& p,
                                const Pose<double>& pose, int c, const Eigen::Vector3d& pw,
                                Eigen::Vector2d& px) {
  const Pose<double> t_wc = pose * rig.cams[c].t_body_cam;
  const Eigen::Vector3d pc = t_wc.inverse() * pw;
  if (pc.z() < p.min_depth || pc.z() > p.max_depth) return false;
  const auto& cam = rig.cams[c];
  px = Eigen::Vector2d(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
  return px.x() >= p.image_margin && px.y() >= p.image_margin &&
         px.x() <= cam.width - p.image_margin && px.y() <= cam.height - p.image_margin;
}

/// Deterministic synthetic world and measurement stream.
inline SyntheticWorld generate_world(const WorldParams& params) {
  params.validate();
  SyntheticWorld w;
  w.params = params;
  w.rig = StereoRig<double>::make(params.focal, params.baseline);
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  w.trajectory = detail::make_trajectory(params, rng);
  for (int k = 0; k < params.num_frames; ++k) w.timestamps.push_back(k * params.frame_dt);

  const int num_lm = std::max(1, static_cast<int>(params.landmarks_per_frame * params.num_frames));
  std::uniform_int_distribution<int> pick_frame(0, params.num_frames - 1);
  w.landmarks.reserve(num_lm);
  for (int i = 0; i < num_lm; ++i) {
    const Eigen::Vector3d& c = w.trajectory[pick_frame(rng)].t;
    Eigen::Vector3d d(n01(rng), n01(rng), n01(rng));
    d.normalize();
    const double dist = params.shell_inner + (params.shell_outer - params.shell_inner) * u01(rng);
    w.landmarks.push_back(c + dist * d);
  }

  struct Track {
    TrackId id;
    int age;
    int length;
  };
  std::map<std::size_t, Track> active;
  TrackId next_track = 0;
  std::geometric_distribution<int> extra_len(1.0 / params.mean_track_length);

  auto observe = [&](const Pose<double>& pose, std::size_t li, Eigen::Vector2d& l,
                     Eigen::Vector2d& r) {
    return project_world_point(w.rig, params, pose, 0, w.landmarks[li], l) &&
           project_world_point(w.rig, params, pose, 1, w.landmarks[li], r);
  };

  for (int k = 0; k < params.num_frames; ++k) {
    const Pose<double>& pose = w.trajectory[k];
    FrameMeasurements m;
    m.id = k;
    m.timestamp = w.timestamps[k];
    if (k > 0) {
      const Pose<double> rel = w.trajectory[k - 1].inverse() * pose;
      Vec6<double> noise;
      for (int i = 0; i < 3; ++i) noise(i) = params.motion_trans_noise * n01(rng);
      for (int i = 3; i < 6; ++i) noise(i) = params.motion_rot_noise * n01(rng);
      m.has_odometry = true;
      m.odometry = box_plus(rel, noise);
      m.has_gravity = true;
      m.gravity = pose.rotation().transpose() * Eigen::Vector3d::UnitZ();
      for (int i = 0; i < 3; ++i) m.gravity(i) += params.gravity_noise * n01(rng);
    }

    auto emit = [&](TrackId t, const Eigen::Vector2d& l, const Eigen::Vector2d& r) {
      StereoObservation ol{t, 0, l}, orr{t, 1, r};
      for (int i = 0; i < 2; ++i) {
        ol.pixel(i) += params.pixel_noise * n01(rng);
        orr.pixel(i) += params.pixel_noise * n01(rng);
      }
      m.observations.push_back(ol);
      m.observations.push_back(orr);
    };

    // Continue existing tracks.
    for (auto it = active.begin(); it != active.end();) {
      Eigen::Vector2d l, r;
      Track& tr = it->second;
      if (tr.age < tr.length && observe(pose, it->first, l, r)) {
        ++tr.age;
        emit(tr.id, l, r);
        ++it;
      } else {
        m.lost_tracks.push_back(tr.id);
        it = active.erase(it);
      }
    }

    // Spawn new tracks among visible, untracked landmarks.
    std::vector<std::size_t> candidates;
    for (std::size_t li = 0; li < w.landmarks.size(); ++li) {
      if (active.count(li)) continue;
      Eigen::Vector2d l, r;
      if (observe(pose, li, l, r)) candidates.push_back(li);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (std::size_t li : candidates) {
      if (static_cast<int>(active.size()) >= params.max_features) break;
      Eigen::Vector2d l, r;
      observe(pose, li, l, r);
      const int len = std::min(params.max_track_length, 1 + extra_len(rng));
      Track tr{next_track++, 1, len};
      w.track_landmark[tr.id] = li;
      active[li] = tr;
      emit(tr.id, l, r);
    }

    if (m.observations.empty()) {
      throw Error("world: frame " + std::to_string(k) + " has no visible landmarks");
    }
    std::sort(m.lost_tracks.begin(), m.lost_tracks.end());
    w.frames.push_back(std::move(m));
  }
  return w;
}

}  // namespace swba
