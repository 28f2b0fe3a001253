#pragma once

#include <vector>

#include "swba/graph/types.hpp"

namespace swba {

template <typename Scalar>
struct ResidualEval {
  bool valid = true;
  VecX<Scalar> r;
  /// Frames the Jacobian blocks refer to (host first for reprojection).
  std::vector<FrameId> frame_ids;
  std::vector<MatX<Scalar>> frame_jacs;
  /// Landmark Jacobian (reprojection only, 2x3).
  MatX<Scalar> landmark_jac;
};

namespace detail {

/// Scaled point q = rho * p_cam for an inverse-depth landmark.
template <typename Scalar>
Vec3<Scalar> landmark_in_camera(const Pose<Scalar>& host, const Pose<Scalar>& target,
                                const PinholeCamera<Scalar>& cam, const Vec3<Scalar>& l,
                                bool same_frame) {
  const Mat3<Scalar> rc = cam.t_body_cam.rotation();
  const Vec3<Scalar>& tc = cam.t_body_cam.t;
  const Vec3<Scalar> b(l.x(), l.y(), Scalar(1));
  const Scalar rho = l.z();
  if (same_frame) return rc.transpose() * (b - rho * tc);
  const Mat3<Scalar> rh = host.rotation();
  const Mat3<Scalar> rt = target.rotation();
  return rc.transpose() * (rt.transpose() * (rh * b + rho * (host.t - target.t)) - rho * tc);
}

template <typename Scalar>
Vec2<Scalar> project(const PinholeCamera<Scalar>& cam, const Vec3<Scalar>& q) {
  return Vec2<Scalar>(cam.fx * q.x() / q.z() + cam.cx, cam.fy * q.y() / q.z() + cam.cy);
}

template <typename Scalar>
Scalar min_depth() {
  return Scalar(kMinInverseDepth);
}

}  // namespace detail

/// Decoupled pose difference [R_b^T (t_a - t_b), Log(R_b^T R_a)].
template <typename Scalar>
Vec6<Scalar> pose_measurement(const Pose<Scalar>& p) {
  Vec6<Scalar> m;
  m.template head<3>() = p.t;
  m.template tail<3>() = so3_log(p.q);
  return m;
}

template <typename Scalar>
Pose<Scalar> pose_from_measurement(const VecX<Scalar>& m) {
  return Pose<Scalar>(so3_exp_quat<Scalar>(m.template segment<3>(3)), m.template head<3>());
}

template <typename Scalar>
ResidualEval<Scalar> evaluate_reprojection(const ResidualBlock<Scalar>& blk,
                                           const WindowProblem<Scalar>& pb,
                                           bool jacobians = true) {
  ResidualEval<Scalar> ev;
  const Landmark<Scalar>& lm = pb.landmarks.at(blk.landmark);
  const FrameState<Scalar>& host = pb.frame(lm.host);
  const FrameState<Scalar>& target = pb.frame(blk.frames[0]);
  const PinholeCamera<Scalar>& cam = pb.rig.cams[blk.camera];
  const bool same = host.id == target.id;

  const Vec3<Scalar> q = detail::landmark_in_camera(host.pose, target.pose, cam, lm.param, same);
  if (!(lm.param.z() > Scalar(0)) || !(q.z() > detail::min_depth<Scalar>() * lm.param.z())) {
    ev.valid = false;
    return ev;
  }
  ev.r = blk.weight_sqrt * (detail::project(cam, q) - blk.measurement);
  if (!jacobians) return ev;

  // Jacobians at the first-estimate poses.
  const Pose<Scalar>& th = host.jacobian_pose();
  const Pose<Scalar>& tt = target.jacobian_pose();
  const Vec3<Scalar> qj = detail::landmark_in_camera(th, tt, cam, lm.param, same);
  if (!(qj.z() > Scalar(0))) {
    ev.valid = false;
    return ev;
  }
  Eigen::Matrix<Scalar, 2, 3> dpi;
  const Scalar iz = Scalar(1) / qj.z();
  dpi << cam.fx * iz, Scalar(0), -cam.fx * qj.x() * iz * iz,  //
      Scalar(0), cam.fy * iz, -cam.fy * qj.y() * iz * iz;
  const Eigen::Matrix<Scalar, 2, 3> wdpi = blk.weight_sqrt * dpi;

  const Mat3<Scalar> rc_t = cam.t_body_cam.rotation().transpose();
  const Vec3<Scalar>& tc = cam.t_body_cam.t;
  const Vec3<Scalar> b(lm.param.x(), lm.param.y(), Scalar(1));
  const Scalar rho = lm.param.z();

  ev.landmark_jac.resize(2, 3);
  if (same) {
    Mat3<Scalar> dq;
    dq.col(0) = rc_t.col(0);
    dq.col(1) = rc_t.col(1);
    dq.col(2) = -rc_t * tc;
    ev.landmark_jac = wdpi * dq;
    ev.frame_ids = {host.id};
    ev.frame_jacs = {MatX<Scalar>::Zero(2, kPoseDim)};
    return ev;
  }

  const Mat3<Scalar> rh = th.rotation();
  const Mat3<Scalar> rt = tt.rotation();
  const Mat3<Scalar> a = rc_t * rt.transpose();
  const Mat3<Scalar> arh = a * rh;
  const Vec3<Scalar> y = rt.transpose() * (rh * b + rho * (th.t - tt.t));

  Eigen::Matrix<Scalar, 3, 6> dq_host, dq_target;
  dq_host.template leftCols<3>() = rho * arh;
  dq_host.template rightCols<3>() = -arh * hat(b);
  dq_target.template leftCols<3>() = -rho * rc_t;
  dq_target.template rightCols<3>() = rc_t * hat(y);

  Mat3<Scalar> dq_l;
  dq_l.col(0) = arh.col(0);
  dq_l.col(1) = arh.col(1);
  dq_l.col(2) = a * (th.t - tt.t) - rc_t * tc;

  ev.frame_ids = {host.id, target.id};
  ev.frame_jacs = {wdpi * dq_host, wdpi * dq_target};
  ev.landmark_jac = wdpi * dq_l;
  return ev;
}

template <typename Scalar>
ResidualEval<Scalar> evaluate_relative_motion(const ResidualBlock<Scalar>& blk,
                                              const WindowProblem<Scalar>& pb,
                                              bool jacobians = true) {
  ResidualEval<Scalar> ev;
  const FrameState<Scalar>& fi = pb.frame(blk.frames[0]);
  const FrameState<Scalar>& fj = pb.frame(blk.frames[1]);
  const Pose<Scalar> z = pose_from_measurement<Scalar>(blk.measurement.head(6));
  const Mat3<Scalar> rz_t = z.rotation().transpose();
  const Index m = blk.measurement.size();

  auto error = [&](const Pose<Scalar>& pi, const Pose<Scalar>& pj) {
    VecX<Scalar> e(m);
    const Mat3<Scalar> ri_t = pi.rotation().transpose();
    e.template head<3>() = rz_t * (ri_t * (pj.t - pi.t) - z.t);
    e.template segment<3>(3) = so3_log<Scalar>(z.q.conjugate() * pi.q.conjugate() * pj.q);
    if (m == 9) {
      e.template tail<3>() = pj.rotation().transpose() * Vec3<Scalar>::UnitZ() -
                             blk.measurement.template tail<3>();
    }
    return e;
  };

  ev.r = blk.weight_sqrt * error(fi.pose, fj.pose);
  if (!jacobians) return ev;

  const Pose<Scalar>& pi = fi.jacobian_pose();
  const Pose<Scalar>& pj = fj.jacobian_pose();
  const Mat3<Scalar> ri_t = pi.rotation().transpose();
  const Mat3<Scalar> rj = pj.rotation();
  const Vec3<Scalar> e_rot = so3_log<Scalar>(z.q.conjugate() * pi.q.conjugate() * pj.q);
  const Mat3<Scalar> jr_inv = so3_right_jacobian_inv(e_rot);

  MatX<Scalar> ji = MatX<Scalar>::Zero(m, kPoseDim);
  MatX<Scalar> jj = MatX<Scalar>::Zero(m, kPoseDim);
  ji.template block<3, 3>(0, 0) = -rz_t;
  ji.template block<3, 3>(0, 3) = rz_t * hat<Scalar>(ri_t * (pj.t - pi.t));
  ji.template block<3, 3>(3, 3) = -jr_inv * rj.transpose() * pi.rotation();
  jj.template block<3, 3>(0, 0) = rz_t * ri_t * rj;
  jj.template block<3, 3>(3, 3) = jr_inv;
  if (m == 9) {
    jj.template block<3, 3>(6, 3) = hat<Scalar>(rj.transpose() * Vec3<Scalar>::UnitZ());
  }
  ev.frame_ids = {fi.id, fj.id};
  ev.frame_jacs = {blk.weight_sqrt * ji, blk.weight_sqrt * jj};
  return ev;
}

template <typename Scalar>
ResidualEval<Scalar> evaluate_absolute_prior(const ResidualBlock<Scalar>& blk,
                                             const WindowProblem<Scalar>& pb,
                                             bool jacobians = true) {
  ResidualEval<Scalar> ev;
  const FrameState<Scalar>& f = pb.frame(blk.frames[0]);
  const Pose<Scalar> z = pose_from_measurement<Scalar>(blk.measurement);
  ev.r = blk.weight_sqrt * box_minus(f.pose, z);
  if (!jacobians) return ev;

  const Pose<Scalar>& p = f.jacobian_pose();
  const Vec6<Scalar> e = box_minus(p, z);
  MatX<Scalar> j = MatX<Scalar>::Zero(6, kPoseDim);
  j.template block<3, 3>(0, 0) = z.rotation().transpose() * p.rotation();
  j.template block<3, 3>(3, 3) = so3_right_jacobian_inv<Scalar>(e.template tail<3>());
  ev.frame_ids = {f.id};
  ev.frame_jacs = {blk.weight_sqrt * j};
  return ev;
}

/// Weighted residual and Jacobians with respect to right increments of each
/// referenced frame (and the landmark for reprojection). Frames frozen for
/// first-estimate Jacobians use their lin point for the Jacobian only.
template <typename Scalar>
ResidualEval<Scalar> evaluate_residual(const ResidualBlock<Scalar>& blk,
                                       const WindowProblem<Scalar>& pb,
                                       bool jacobians = true) {
  switch (blk.kind) {
    case ResidualKind::kReprojection: return evaluate_reprojection(blk, pb, jacobians);
    case ResidualKind::kRelativeMotion: return evaluate_relative_motion(blk, pb, jacobians);
    default: return evaluate_absolute_prior(blk, pb, jacobians);
  }
}

/// Offsets of frozen frames relative to their lin point, for prior evaluation.
template <typename Scalar>
std::map<FrameId, Vec6<Scalar>> frame_offsets(const WindowProblem<Scalar>& pb) {
  std::map<FrameId, Vec6<Scalar>> out;
  for (const auto& f : pb.frames) out[f.id] = f.frozen ? f.delta : Vec6<Scalar>::Zero();
  return out;
}

/// 1/2 |r_a|^2 over valid blocks plus the prior energy; accumulated in double.
template <typename Scalar>
double total_energy(const WindowProblem<Scalar>& pb, Index* invalid_blocks = nullptr) {
  double e = 0.0;
  Index invalid = 0;
  for (const auto& blk : pb.residuals) {
    const ResidualEval<Scalar> ev = evaluate_residual(blk, pb, false);
    if (!ev.valid) {
      ++invalid;
      continue;
    }
    e += 0.5 * ev.r.template cast<double>().squaredNorm();
  }
  if (invalid_blocks) *invalid_blocks = invalid;
  return e + prior_energy(pb.prior, frame_offsets(pb));
}

}  // namespace swba
