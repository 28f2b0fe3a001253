#pragma once

#include <cstdint>
#include <vector>

#include "swba/geometry/se3.hpp"
#include "swba/marg/prior.hpp"

namespace swba {

using TrackId = std::int64_t;

struct StereoObservation {
  TrackId track = 0;
  int camera = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

/// Everything the estimator receives for one new keyframe.
struct FrameMeasurements {
  FrameId id = 0;
  double timestamp = 0.0;
  /// Relative motion previous <- current: T_prev^-1 T_cur.
  bool has_odometry = false;
  Pose<double> odometry;
  /// Measured direction of the world z axis in the body frame.
  bool has_gravity = false;
  Eigen::Vector3d gravity = Eigen::Vector3d::UnitZ();
  std::vector<StereoObservation> observations;
  /// Tracks that were visible in the previous frame and are not anymore.
  std::vector<TrackId> lost_tracks;
};

}  // namespace swba
