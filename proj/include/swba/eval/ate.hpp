#pragma once

#include <cmath>
#include <vector>

#include <Eigen/SVD>

#include "swba/geometry/se3.hpp"

namespace swba {

/// Rigid transform mapping estimate positions onto ground truth.
struct RigidAlignment {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Closed-form least-squares rotation and translation (no scale) with
/// r * est_i + t ~ ref_i.
inline RigidAlignment align_rigid(const std::vector<Eigen::Vector3d>& est,
                                  const std::vector<Eigen::Vector3d>& ref) {
  if (est.size() != ref.size()) throw Error("align_rigid: point sets differ in size");
  if (est.size() < 3) throw Error("align_rigid: need at least 3 points");
  const double n = static_cast<double>(est.size());
  Eigen::Vector3d me = Eigen::Vector3d::Zero(), mr = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    me += est[i];
    mr += ref[i];
  }
  me /= n;
  mr /= n;
  Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) w += (ref[i] - mr) * (est[i] - me).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) s(2, 2) = -1.0;
  RigidAlignment a;
  a.r = svd.matrixU() * s * svd.matrixV().transpose();
  a.t = mr - a.r * me;
  return a;
}

/// Translational RMSE of positions after rigid alignment of the estimate.
inline double ate_rmse(const std::vector<Pose<double>>& estimate,
                       const std::vector<Pose<double>>& truth) {
  if (estimate.size() != truth.size()) throw Error("ate_rmse: trajectories differ in length");
  if (estimate.size() < 3) throw Error("ate_rmse: need at least 3 poses");
  std::vector<Eigen::Vector3d> e, g;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    e.push_back(estimate[i].t);
    g.push_back(truth[i].t);
  }
  const RigidAlignment a = align_rigid(e, g);
  double sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) sum += (a.r * e[i] + a.t - g[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(e.size()));
}

}  // namespace swba
