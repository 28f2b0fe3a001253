#pragma once

#include <cmath>

#include <Eigen/Geometry>

#include "swba/linalg/dense.hpp"

namespace swba {

template <typename Scalar>
Mat3<Scalar> hat(const Vec3<Scalar>& w) {
  Mat3<Scalar> m;
  m << Scalar(0), -w.z(), w.y(),  //
      w.z(), Scalar(0), -w.x(),   //
      -w.y(), w.x(), Scalar(0);
  return m;
}

template <typename Scalar>
Eigen::Quaternion<Scalar> so3_exp_quat(const Vec3<Scalar>& w) {
  const Scalar theta2 = w.squaredNorm();
  const Scalar theta = std::sqrt(theta2);
  Scalar re, im;
  if (theta < Scalar(1e-4)) {
    // Taylor expansions of cos(theta/2) and sin(theta/2)/theta.
    re = Scalar(1) - theta2 / Scalar(8);
    im = Scalar(0.5) - theta2 / Scalar(48);
  } else {
    re = std::cos(theta / Scalar(2));
    im = std::sin(theta / Scalar(2)) / theta;
  }
  Eigen::Quaternion<Scalar> q(re, im * w.x(), im * w.y(), im * w.z());
  q.normalize();
  return q;
}

template <typename Scalar>
Mat3<Scalar> so3_exp(const Vec3<Scalar>& w) {
  return so3_exp_quat(w).toRotationMatrix();
}

template <typename Scalar>
Vec3<Scalar> so3_log(const Eigen::Quaternion<Scalar>& q_in) {
  Eigen::Quaternion<Scalar> q = q_in.normalized();
  if (q.w() < Scalar(0)) q.coeffs() = -q.coeffs();
  const Vec3<Scalar> v = q.vec();
  const Scalar n = v.norm();
  if (n < Scalar(1e-6)) {
    // atan2(n, w) / n ~ 1/w - n^2 / (3 w^3)
    const Scalar w = q.w();
    return (Scalar(2) / w - Scalar(2) * n * n / (Scalar(3) * w * w * w)) * v;
  }
  return (Scalar(2) * std::atan2(n, q.w()) / n) * v;
}

template <typename Scalar>
Vec3<Scalar> so3_log(const Mat3<Scalar>& r) {
  return so3_log(Eigen::Quaternion<Scalar>(r));
}

/// Right Jacobian of SO(3): Exp(w + d) ~ Exp(w) Exp(Jr(w) d).
template <typename Scalar>
Mat3<Scalar> so3_right_jacobian(const Vec3<Scalar>& w) {
  const Scalar theta2 = w.squaredNorm();
  const Mat3<Scalar> k = hat(w);
  if (theta2 < Scalar(1e-8)) {
    return Mat3<Scalar>::Identity() - Scalar(0.5) * k + k * k / Scalar(6);
  }
  const Scalar theta = std::sqrt(theta2);
  return Mat3<Scalar>::Identity() -
         (Scalar(1) - std::cos(theta)) / theta2 * k +
         (theta - std::sin(theta)) / (theta2 * theta) * k * k;
}

template <typename Scalar>
Mat3<Scalar> so3_right_jacobian_inv(const Vec3<Scalar>& w) {
  const Scalar theta2 = w.squaredNorm();
  const Mat3<Scalar> k = hat(w);
  if (theta2 < Scalar(1e-8)) {
    return Mat3<Scalar>::Identity() + Scalar(0.5) * k + k * k / Scalar(12);
  }
  const Scalar theta = std::sqrt(theta2);
  return Mat3<Scalar>::Identity() + Scalar(0.5) * k +
         (Scalar(1) / theta2 -
          (Scalar(1) + std::cos(theta)) / (Scalar(2) * theta * std::sin(theta))) *
             k * k;
}

/// Rigid body transform world <- body. Tangent vectors are ordered
/// (translation, rotation) and applied on the right with a decoupled update:
/// R <- R Exp(w), t <- t + R v.
template <typename Scalar>
struct Pose {
  Eigen::Quaternion<Scalar> q = Eigen::Quaternion<Scalar>::Identity();
  Vec3<Scalar> t = Vec3<Scalar>::Zero();

  Pose() = default;
  Pose(const Eigen::Quaternion<Scalar>& q_, const Vec3<Scalar>& t_)
      : q(q_.normalized()), t(t_) {}
  Pose(const Mat3<Scalar>& r, const Vec3<Scalar>& t_)
      : q(Eigen::Quaternion<Scalar>(r).normalized()), t(t_) {}

  Mat3<Scalar> rotation() const { return q.toRotationMatrix(); }

  Pose inverse() const {
    const Eigen::Quaternion<Scalar> qi = q.conjugate();
    return Pose(qi, -(qi * t));
  }

  Pose operator*(const Pose& o) const { return Pose(q * o.q, t + q * o.t); }

  Vec3<Scalar> operator*(const Vec3<Scalar>& p) const { return q * p + t; }

  template <typename T>
  Pose<T> cast() const {
    return Pose<T>(q.template cast<T>(), t.template cast<T>());
  }
};

template <typename Scalar>
Pose<Scalar> box_plus(const Pose<Scalar>& x, const Vec6<Scalar>& d) {
  Eigen::Quaternion<Scalar> q = x.q * so3_exp_quat<Scalar>(d.template tail<3>());
  q.normalize();
  return Pose<Scalar>(q, x.t + x.q * d.template head<3>());
}

/// Inverse of box_plus: box_plus(b, box_minus(a, b)) == a.
template <typename Scalar>
Vec6<Scalar> box_minus(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  Vec6<Scalar> d;
  d.template head<3>() = b.q.conjugate() * (a.t - b.t);
  d.template tail<3>() = so3_log<Scalar>(b.q.conjugate() * a.q);
  return d;
}

/// Chart-relative representation of a pose: anchor [+] offset.
template <typename Scalar>
struct ChartPoint {
  Pose<Scalar> anchor;
  Vec6<Scalar> offset = Vec6<Scalar>::Zero();

  Pose<Scalar> pose() const { return box_plus(anchor, offset); }
};

}  // namespace swba
