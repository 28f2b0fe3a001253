#pragma once

#include <array>
#include <string_view>

#include "swba/geometry/se3.hpp"

namespace swba {

/// Global motions applied jointly to all frames.
enum class GaugeDirection { kTx, kTy, kTz, kRoll, kPitch, kYaw };

inline constexpr std::array<GaugeDirection, 6> kAllGaugeDirections = {
    GaugeDirection::kTx,   GaugeDirection::kTy,    GaugeDirection::kTz,
    GaugeDirection::kRoll, GaugeDirection::kPitch, GaugeDirection::kYaw};

inline std::string_view to_string(GaugeDirection d) {
  static constexpr std::array<std::string_view, 6> names = {"tx", "ty", "tz",
                                                            "roll", "pitch", "yaw"};
  return names[static_cast<int>(d)];
}

/// Tangent vector (translation, rotation) at `pose` induced by an
/// infinitesimal global translation along, or rotation about, a world axis.
/// Rotations are about the world origin: t -> Exp(a) t, R -> Exp(a) R.
template <typename Scalar>
Vec6<Scalar> gauge_tangent(const Pose<Scalar>& pose, GaugeDirection d) {
  const int axis = static_cast<int>(d) % 3;
  const Vec3<Scalar> a = Vec3<Scalar>::Unit(axis);
  const Mat3<Scalar> rt = pose.rotation().transpose();
  Vec6<Scalar> v = Vec6<Scalar>::Zero();
  if (static_cast<int>(d) < 3) {
    v.template head<3>() = rt * a;
  } else {
    v.template head<3>() = rt * a.cross(pose.t);
    v.template tail<3>() = rt * a;
  }
  return v;
}

}  // namespace swba
