#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "swba/geometry/se3.hpp"
#include "swba/linalg/dense.hpp"
#include "swba/linalg/ldlt_sqrt.hpp"

namespace swba {

using FrameId = std::int64_t;

/// Tangent dimension of one frame variable.
inline constexpr Index kPoseDim = 6;

enum class PriorForm { kNone, kSquared, kSqrt };

inline std::string_view to_string(PriorForm f) {
  switch (f) {
    case PriorForm::kSquared: return "squared";
    case PriorForm::kSqrt: return "sqrt";
    default: return "none";
  }
}

/// Marginalization prior over a set of frames, either as
///   E(d) = 1/2 d^T H d + b^T d          (squared)
/// or
///   E(d) = 1/2 |r + J d|^2              (sqrt)
/// where d stacks, per frame, the chart offset relative to lin_points[i].
template <typename Scalar>
struct MarginalizationPrior {
  PriorForm form = PriorForm::kNone;
  MatX<Scalar> h;
  VecX<Scalar> b;
  MatX<Scalar> j;
  VecX<Scalar> r;
  std::vector<FrameId> frame_ids;
  std::vector<ChartPoint<Scalar>> lin_points;

  Index dim() const { return kPoseDim * static_cast<Index>(frame_ids.size()); }
  bool empty() const { return form == PriorForm::kNone || frame_ids.empty(); }

  /// Position of the frame in variable order, or -1.
  Index index_of(FrameId id) const {
    for (std::size_t i = 0; i < frame_ids.size(); ++i) {
      if (frame_ids[i] == id) return static_cast<Index>(i);
    }
    return -1;
  }

  /// Rows of J (sqrt form) or rank-agnostic dimension (squared form).
  Index rows() const {
    return form == PriorForm::kSqrt ? j.rows() : (form == PriorForm::kSquared ? h.rows() : 0);
  }

  /// H (squared form) or J^T J (sqrt form).
  MatX<Scalar> hessian() const {
    if (form == PriorForm::kSquared) return h;
    if (form == PriorForm::kSqrt) return j.transpose() * j;
    return MatX<Scalar>::Zero(dim(), dim());
  }

  /// b (squared form) or J^T r (sqrt form).
  VecX<Scalar> gradient() const {
    if (form == PriorForm::kSquared) return b;
    if (form == PriorForm::kSqrt) return j.transpose() * r;
    return VecX<Scalar>::Zero(dim());
  }

  template <typename T>
  MarginalizationPrior<T> cast() const {
    MarginalizationPrior<T> o;
    o.form = form;
    o.h = h.template cast<T>();
    o.b = b.template cast<T>();
    o.j = j.template cast<T>();
    o.r = r.template cast<T>();
    o.frame_ids = frame_ids;
    for (const auto& lp : lin_points) {
      o.lin_points.push_back({lp.anchor.template cast<T>(), lp.offset.template cast<T>()});
    }
    return o;
  }

  void validate() const {
    const Index n = dim();
    if (lin_points.size() != frame_ids.size()) {
      throw Error("prior: lin_points and frame_ids differ in length");
    }
    if (form == PriorForm::kSquared) {
      if (h.rows() != n || h.cols() != n || b.size() != n) {
        throw Error("prior: squared form dimensions do not match variables");
      }
    } else if (form == PriorForm::kSqrt) {
      if (j.cols() != n || j.rows() != r.size() || j.rows() > n) {
        throw Error("prior: sqrt form dimensions do not match variables");
      }
    }
  }
};

/// Energy for a stacked chart offset d (relative to the lin points).
template <typename Scalar>
double prior_energy(const MarginalizationPrior<Scalar>& p, const VecX<Scalar>& d) {
  if (p.form == PriorForm::kNone) return 0.0;
  if (d.size() != p.dim()) throw Error("prior_energy: dimension mismatch");
  if (p.form == PriorForm::kSquared) {
    const VecX<Scalar> hd = p.h * d;
    return 0.5 * static_cast<double>(d.dot(hd)) + static_cast<double>(p.b.dot(d));
  }
  const VecX<Scalar> e = p.r + p.j * d;
  return 0.5 * e.template cast<double>().squaredNorm();
}

/// Stacks frame offsets from a map of frame chart offsets (offset of each
/// frame relative to the same anchor as the prior's lin point).
template <typename Scalar>
VecX<Scalar> prior_delta(const MarginalizationPrior<Scalar>& p,
                         const std::map<FrameId, Vec6<Scalar>>& frame_offsets) {
  VecX<Scalar> d(p.dim());
  for (std::size_t i = 0; i < p.frame_ids.size(); ++i) {
    auto it = frame_offsets.find(p.frame_ids[i]);
    if (it == frame_offsets.end()) {
      throw Error("prior: missing variable for frame " + std::to_string(p.frame_ids[i]));
    }
    d.template segment<kPoseDim>(kPoseDim * i) = it->second - p.lin_points[i].offset;
  }
  return d;
}

template <typename Scalar>
double prior_energy(const MarginalizationPrior<Scalar>& p,
                    const std::map<FrameId, Vec6<Scalar>>& frame_offsets) {
  if (p.form == PriorForm::kNone) return 0.0;
  return prior_energy(p, prior_delta(p, frame_offsets));
}

/// Moves the expansion point by delta: r += J delta (b += H delta) and the
/// lin point offsets advance by delta.
template <typename Scalar>
MarginalizationPrior<Scalar> shift_prior(const MarginalizationPrior<Scalar>& p,
                                         const VecX<Scalar>& delta) {
  if (delta.size() != p.dim()) throw Error("shift_prior: dimension mismatch");
  MarginalizationPrior<Scalar> o = p;
  if (p.form == PriorForm::kSquared) {
    o.b = p.b + p.h * delta;
  } else if (p.form == PriorForm::kSqrt) {
    o.r = p.r + p.j * delta;
  }
  for (std::size_t i = 0; i < o.lin_points.size(); ++i) {
    o.lin_points[i].offset += delta.template segment<kPoseDim>(kPoseDim * i);
  }
  return o;
}

template <typename Scalar>
MarginalizationPrior<Scalar> squared_from_sqrt(const MarginalizationPrior<Scalar>& p) {
  if (p.form != PriorForm::kSqrt) throw Error("squared_from_sqrt: prior is not in sqrt form");
  MarginalizationPrior<Scalar> o = p;
  o.form = PriorForm::kSquared;
  o.h = p.j.transpose() * p.j;
  o.b = p.j.transpose() * p.r;
  o.j.resize(0, 0);
  o.r.resize(0);
  return o;
}

template <typename Scalar>
struct SqrtConversion {
  MarginalizationPrior<Scalar> prior;
  /// Pivots below -tolerance that were clamped.
  Index negative_pivots = 0;
  double most_negative_pivot = 0.0;
  bool definiteness_warning() const { return negative_pivots > 0; }
};

/// J = ldlt_sqrt(H); r is the least-squares solution of J^T r = b.
template <typename Scalar>
SqrtConversion<Scalar> sqrt_from_squared(const MarginalizationPrior<Scalar>& p) {
  if (p.form != PriorForm::kSquared) throw Error("sqrt_from_squared: prior is not in squared form");
  SqrtConversion<Scalar> out;
  const LdltSqrtResult<Scalar> f = ldlt_sqrt_factor(p.h);
  out.negative_pivots = f.negative_pivots;
  out.most_negative_pivot = f.most_negative_pivot;
  out.prior = p;
  out.prior.form = PriorForm::kSqrt;
  out.prior.j = f.r;
  if (f.r.rows() > 0) {
    const MatX<Scalar> jt = f.r.transpose();
    out.prior.r = jt.colPivHouseholderQr().solve(p.b);
  } else {
    out.prior.r.resize(0);
  }
  out.prior.h.resize(0, 0);
  out.prior.b.resize(0);
  return out;
}

}  // namespace swba
