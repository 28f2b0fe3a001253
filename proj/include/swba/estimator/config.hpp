#pragma once

#include <string>
#include <string_view>

#include "swba/linalg/dense.hpp"

namespace swba {

enum class OptBackend { kNsLdlt, kScLdlt };
enum class MargBackend { kNsQr, kScSc };
enum class GaugeMode { kVioLike, kVoLike };

inline std::string_view to_string(OptBackend b) {
  return b == OptBackend::kNsLdlt ? "ns_ldlt" : "sc_ldlt";
}
inline std::string_view to_string(MargBackend b) {
  return b == MargBackend::kNsQr ? "ns_qr" : "sc_sc";
}
inline std::string_view to_string(GaugeMode g) {
  return g == GaugeMode::kVioLike ? "vio_like" : "vo_like";
}

inline OptBackend opt_backend_from_string(std::string_view s) {
  if (s == "ns_ldlt" || s == "ns") return OptBackend::kNsLdlt;
  if (s == "sc_ldlt" || s == "sc") return OptBackend::kScLdlt;
  throw Error("unknown optimization backend '" + std::string(s) + "'");
}
inline MargBackend marg_backend_from_string(std::string_view s) {
  if (s == "ns_qr" || s == "qr") return MargBackend::kNsQr;
  if (s == "sc_sc" || s == "sc") return MargBackend::kScSc;
  throw Error("unknown marginalization backend '" + std::string(s) + "'");
}
inline GaugeMode gauge_mode_from_string(std::string_view s) {
  if (s == "vio_like" || s == "vio") return GaugeMode::kVioLike;
  if (s == "vo_like" || s == "vo") return GaugeMode::kVoLike;
  throw Error("unknown gauge mode '" + std::string(s) + "'");
}

/// Number of unobservable global directions.
inline int gauge_dof(GaugeMode g) { return g == GaugeMode::kVioLike ? 4 : 6; }

struct LmConfig {
  double initial_lambda = 1e-4;
  double lambda_up = 2.0;
  double lambda_down = 3.0;
  double max_lambda = 1e2;
  double min_lambda = 1e-6;
  int max_iterations = 10;
  /// Stop when a step changes the energy by less than this fraction.
  double function_tolerance = 1e-8;
  /// Stop when the largest increment component is below this.
  double parameter_tolerance = 1e-10;
};

/// Measurement standard deviations used to weight residuals.
struct NoiseWeights {
  double pixel_sigma = 1.0;
  double odom_trans_sigma = 0.01;
  double odom_rot_sigma = 0.005;
  double gravity_sigma = 0.01;
};

struct SolverConfig {
  int window_size = 7;
  Precision precision = Precision::kDouble;
  OptBackend opt_backend = OptBackend::kNsLdlt;
  MargBackend marg_backend = MargBackend::kNsQr;
  LmConfig lm;
  double zero_tol_factor = kDefaultZeroTolFactor;
  GaugeMode gauge_mode = GaugeMode::kVioLike;
  /// Square-root weight of the pose prior that fixes the gauge of the
  /// oldest window frame during optimization.
  double gauge_prior_weight = 1e3;
  NoiseWeights noise;

  void validate() const {
    if (window_size < 2) throw Error("solver config: window_size must be >= 2");
    if (!(lm.initial_lambda > 0) || !(lm.min_lambda > 0) || !(lm.max_lambda >= lm.min_lambda)) {
      throw Error("solver config: damping must be positive");
    }
    if (!(lm.lambda_up > 1) || !(lm.lambda_down > 1)) {
      throw Error("solver config: damping factors must exceed 1");
    }
    if (lm.max_iterations < 1) throw Error("solver config: max_iterations must be >= 1");
    if (!(lm.function_tolerance >= 0) || !(lm.parameter_tolerance >= 0)) {
      throw Error("solver config: tolerances must be non-negative");
    }
    if (!(zero_tol_factor >= 0)) throw Error("solver config: zero_tol factor must be >= 0");
    if (!(gauge_prior_weight > 0)) throw Error("solver config: gauge prior weight must be > 0");
    if (!(noise.pixel_sigma > 0) || !(noise.odom_trans_sigma > 0) ||
        !(noise.odom_rot_sigma > 0) || !(noise.gravity_sigma > 0)) {
      throw Error("solver config: noise weights must be positive");
    }
  }
};

}  // namespace swba
