#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>

#include "swba/estimator/config.hpp"
#include "swba/geometry/gauge.hpp"
#include "swba/linalg/svd.hpp"
#include "swba/marg/prior.hpp"

namespace swba {

/// Probe order: tx, ty, tz, roll, pitch, yaw, random.
inline constexpr int kNumProbes = 7;
inline constexpr std::array<std::string_view, kNumProbes> kProbeNames = {
    "tx", "ty", "tz", "roll", "pitch", "yaw", "random"};

using ProbeCosts = std::array<double, kNumProbes>;

struct DiagnosticsRecord {
  Index event_index = 0;
  FrameId marginalized_frame = -1;
  /// Absent for an empty prior.
  std::optional<double> sigma_min;
  ProbeCosts probes{};
  Index prior_rank = 0;
  Index rank_gap = 0;
  Index dropped_observations = 0;
  Index marginalized_landmarks = 0;
};

/// Whether a probe index is a gauge direction in the given mode.
inline bool is_gauge_probe(int probe, GaugeMode mode) {
  if (probe >= 6) return false;
  if (mode == GaugeMode::kVoLike) return true;
  return probe <= 2 || probe == 5;
}

/// Unit-norm perturbation of all prior frames along a global motion,
/// expressed in each frame's chart at its lin point.
inline VecXd gauge_probe_vector(const MarginalizationPrior<double>& p, GaugeDirection d) {
  VecXd eps(p.dim());
  for (std::size_t i = 0; i < p.frame_ids.size(); ++i) {
    eps.segment<kPoseDim>(kPoseDim * i) = gauge_tangent(p.lin_points[i].pose(), d);
  }
  const double n = eps.norm();
  if (n > 0) eps /= n;
  return eps;
}

/// Delta E_m = 1/2 e^T H e + e^T b for gauge probes and one random unit
/// vector, evaluated in double. `random_seed` drives the random probe.
template <typename Scalar>
ProbeCosts probe_nullspace(const MarginalizationPrior<Scalar>& prior_in,
                           std::uint64_t random_seed) {
  ProbeCosts out{};
  if (prior_in.empty()) return out;
  const MarginalizationPrior<double> p = prior_in.template cast<double>();
  const MatXd h = p.hessian();
  const VecXd b = p.gradient();
  auto cost = [&](const VecXd& e) { return 0.5 * e.dot(h * e) + e.dot(b); };
  for (int k = 0; k < 6; ++k) {
    out[k] = cost(gauge_probe_vector(p, kAllGaugeDirections[k]));
  }
  std::mt19937_64 rng(random_seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  VecXd e(p.dim());
  for (Index i = 0; i < e.size(); ++i) e(i) = n01(rng);
  e /= e.norm();
  out[6] = cost(e);
  return out;
}

/// Smallest eigenvalue of the prior Hessian after conversion to double.
template <typename Scalar>
std::optional<double> track_sigma_min(const MarginalizationPrior<Scalar>& prior) {
  if (prior.empty()) return std::nullopt;
  const MarginalizationPrior<double> p = prior.template cast<double>();
  return min_eigenvalue(p.hessian());
}

/// Relative eigenvalue threshold used for rank diagnostics on Gram matrices.
inline constexpr double kGramRankTolerance = 1e-12;

inline Index gram_rank(const MatXd& h) {
  if (h.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<MatXd> es(0.5 * (h + h.transpose()), Eigen::EigenvaluesOnly);
  const VecXd ev = es.eigenvalues();
  const double cutoff = kGramRankTolerance * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  Index r = 0;
  for (Index i = 0; i < ev.size(); ++i) r += ev(i) > cutoff ? 1 : 0;
  return r;
}

/// rank(J_mu) + rank(J_rest) - rank(J) from the Gram matrix of [J_mu J_rest].
inline Index rank_gap_from_gram(const MatXd& h, Index n_mu) {
  const Index n = h.rows();
  return gram_rank(h.topLeftCorner(n_mu, n_mu)) +
         gram_rank(h.bottomRightCorner(n - n_mu, n - n_mu)) - gram_rank(h);
}

}  // namespace swba
