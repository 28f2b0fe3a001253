#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "swba/geometry/se3.hpp"
#include "swba/marg/prior.hpp"

namespace swba {

using LandmarkId = std::int64_t;

template <typename Scalar>
struct PinholeCamera {
  Scalar fx = 450, fy = 450, cx = 320, cy = 240;
  int width = 640, height = 480;
  /// body <- camera
  Pose<Scalar> t_body_cam;

  template <typename T>
  PinholeCamera<T> cast() const {
    return {T(fx), T(fy), T(cx), T(cy), width, height, t_body_cam.template cast<T>()};
  }

  bool in_image(const Vec2<Scalar>& px) const {
    return px.x() >= Scalar(0) && px.y() >= Scalar(0) && px.x() < Scalar(width) &&
           px.y() < Scalar(height);
  }
};

/// Left camera coincides with the body frame; the right camera is offset by
/// `baseline` along the body x axis.
template <typename Scalar>
struct StereoRig {
  std::array<PinholeCamera<Scalar>, 2> cams;

  static StereoRig make(Scalar f, Scalar baseline, Scalar cx = 320, Scalar cy = 240,
                        int width = 640, int height = 480) {
    StereoRig rig;
    for (int c = 0; c < 2; ++c) {
      rig.cams[c] = {f, f, cx, cy, width, height, Pose<Scalar>()};
    }
    rig.cams[1].t_body_cam.t = Vec3<Scalar>(baseline, 0, 0);
    return rig;
  }

  template <typename T>
  StereoRig<T> cast() const {
    StereoRig<T> o;
    o.cams = {cams[0].template cast<T>(), cams[1].template cast<T>()};
    return o;
  }
};

/// One keyframe. Once frozen (connected to the marginalization prior) the
/// pose is lin [+] delta, and Jacobians are evaluated at lin.
template <typename Scalar>
struct FrameState {
  FrameId id = 0;
  double timestamp = 0.0;
  Pose<Scalar> pose;
  bool frozen = false;
  Pose<Scalar> lin;
  Vec6<Scalar> delta = Vec6<Scalar>::Zero();

  void apply_increment(const Vec6<Scalar>& d) {
    if (frozen) {
      delta += d;
      pose = box_plus(lin, delta);
    } else {
      pose = box_plus(pose, d);
    }
  }

  void freeze() {
    if (frozen) return;
    frozen = true;
    lin = pose;
    delta.setZero();
  }

  const Pose<Scalar>& jacobian_pose() const { return frozen ? lin : pose; }
};

/// Inverse-depth landmark: bearing (u, v, 1) and inverse depth rho in the
/// host frame's left camera.
template <typename Scalar>
struct Landmark {
  LandmarkId id = 0;
  FrameId host = 0;
  Vec3<Scalar> param = Vec3<Scalar>(0, 0, 1);
  /// Track ended; the landmark is marginalized at the next event.
  bool lost = false;

  Vec3<Scalar> bearing() const { return Vec3<Scalar>(param.x(), param.y(), Scalar(1)); }
  /// Point in the host body frame.
  Vec3<Scalar> point_in_host() const { return bearing() / param.z(); }
};

inline constexpr double kMinInverseDepth = 1e-6;

enum class ResidualKind { kReprojection, kRelativeMotion, kAbsolutePrior };

inline std::string_view to_string(ResidualKind k) {
  switch (k) {
    case ResidualKind::kReprojection: return "reprojection";
    case ResidualKind::kRelativeMotion: return "relative_motion";
    default: return "absolute_prior";
  }
}

inline ResidualKind residual_kind_from_string(std::string_view s) {
  if (s == "reprojection") return ResidualKind::kReprojection;
  if (s == "relative_motion") return ResidualKind::kRelativeMotion;
  if (s == "absolute_prior") return ResidualKind::kAbsolutePrior;
  throw Error("unknown residual kind '" + std::string(s) + "'");
}

/// Weighted residual r = W e(x) with
///  - reprojection: frames {target}, landmark and camera set; e = pi(q) - z (2)
///  - relative_motion: frames {i, j}; measurement [t_ij, log R_ij] (6) or with
///    the gravity direction in frame j appended (9)
///  - absolute_prior: frames {i}; measurement [t, log R] (6)
template <typename Scalar>
struct ResidualBlock {
  ResidualKind kind = ResidualKind::kReprojection;
  std::vector<FrameId> frames;
  LandmarkId landmark = -1;
  int camera = 0;
  VecX<Scalar> measurement;
  MatX<Scalar> weight_sqrt;

  Index dim() const { return weight_sqrt.rows(); }

  void validate() const {
    const Index m = measurement.size();
    bool ok = weight_sqrt.cols() == m;
    switch (kind) {
      case ResidualKind::kReprojection:
        ok = ok && m == 2 && frames.size() == 1 && landmark >= 0 && (camera == 0 || camera == 1);
        break;
      case ResidualKind::kRelativeMotion:
        ok = ok && (m == 6 || m == 9) && frames.size() == 2;
        break;
      case ResidualKind::kAbsolutePrior:
        ok = ok && m == 6 && frames.size() == 1;
        break;
    }
    if (!ok) throw Error("residual block: inconsistent " + std::string(to_string(kind)) + " block");
  }
};

template <typename Scalar>
struct WindowProblem {
  StereoRig<Scalar> rig;
  /// Oldest first.
  std::vector<FrameState<Scalar>> frames;
  std::map<LandmarkId, Landmark<Scalar>> landmarks;
  std::vector<ResidualBlock<Scalar>> residuals;
  MarginalizationPrior<Scalar> prior;

  Index frame_index(FrameId id) const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].id == id) return static_cast<Index>(i);
    }
    return -1;
  }

  const FrameState<Scalar>& frame(FrameId id) const {
    const Index i = frame_index(id);
    if (i < 0) throw Error("window: unknown frame " + std::to_string(id));
    return frames[i];
  }

  FrameState<Scalar>& frame(FrameId id) {
    const Index i = frame_index(id);
    if (i < 0) throw Error("window: unknown frame " + std::to_string(id));
    return frames[i];
  }

  std::vector<FrameId> frame_ids() const {
    std::vector<FrameId> ids;
    for (const auto& f : frames) ids.push_back(f.id);
    return ids;
  }

  /// Every residual references only frames/landmarks present; the prior's
  /// frames appear in window order.
  void validate() const {
    for (const auto& r : residuals) {
      r.validate();
      for (FrameId f : r.frames) {
        if (frame_index(f) < 0) throw Error("window: residual references missing frame");
      }
      if (r.kind == ResidualKind::kReprojection) {
        auto it = landmarks.find(r.landmark);
        if (it == landmarks.end()) throw Error("window: residual references missing landmark");
        if (frame_index(it->second.host) < 0) throw Error("window: landmark host missing");
      }
    }
    Index last = -1;
    for (FrameId f : prior.frame_ids) {
      const Index i = frame_index(f);
      if (i <= last) throw Error("window: prior variables not in window order");
      last = i;
    }
    prior.validate();
  }
};

}  // namespace swba
