#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "swba/estimator/config.hpp"
#include "swba/sim/world.hpp"

namespace swba {

/// One cell of the ablation matrix.
struct VariantSpec {
  OptBackend opt = OptBackend::kNsLdlt;
  MargBackend marg = MargBackend::kNsQr;
  Precision precision = Precision::kDouble;

  std::string name() const {
    return std::string(to_string(opt)) + "-" + std::string(to_string(marg)) + "-" +
           std::string(to_string(precision));
  }

  bool operator==(const VariantSpec& o) const {
    return opt == o.opt && marg == o.marg && precision == o.precision;
  }
};

/// Parses "opt:marg:precision", e.g. "ns_ldlt:ns_qr:double".
inline VariantSpec parse_variant(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ':' || c == '-' || c == '/') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) {
    throw Error("variant '" + s + "' must have the form opt:marg:precision");
  }
  return {opt_backend_from_string(parts[0]), marg_backend_from_string(parts[1]),
          precision_from_string(parts[2])};
}

/// All eight combinations, double precision first.
inline std::vector<VariantSpec> all_variants() {
  std::vector<VariantSpec> out;
  for (Precision p : {Precision::kDouble, Precision::kSingle}) {
    for (OptBackend o : {OptBackend::kNsLdlt, OptBackend::kScLdlt}) {
      for (MargBackend m : {MargBackend::kNsQr, MargBackend::kScSc}) out.push_back({o, m, p});
    }
  }
  return out;
}

/// Comma-separated variant list; "all" selects the full matrix, "" none.
inline std::vector<VariantSpec> parse_variant_list(const std::string& s) {
  std::vector<VariantSpec> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item.empty()) continue;
    if (item == "all") {
      for (const auto& v : all_variants()) out.push_back(v);
    } else if (item == "double" || item == "single") {
      for (const auto& v : all_variants()) {
        if (v.precision == precision_from_string(item)) out.push_back(v);
      }
    } else {
      out.push_back(parse_variant(item));
    }
  }
  std::vector<VariantSpec> unique;
  for (const auto& v : out) {
    if (std::find(unique.begin(), unique.end(), v) == unique.end()) unique.push_back(v);
  }
  return unique;
}

struct RunConfig {
  WorldParams world;
  SolverConfig solver;
  std::vector<VariantSpec> variants;
  std::string output_dir = "out";
  /// Initial-guess perturbation of every new frame (m, rad).
  double init_trans_perturbation = 0.02;
  double init_rot_perturbation = 0.005;

  std::uint64_t seed() const { return world.seed; }

  void validate() const {
    world.validate();
    solver.validate();
    if (init_trans_perturbation < 0 || init_rot_perturbation < 0) {
      throw Error("run config: perturbations must be non-negative");
    }
  }
};

/// Estimator weights follow the simulated noise; noise-free worlds fall back
/// to nominal values.
inline NoiseWeights weights_for_world(const WorldParams& w) {
  NoiseWeights n;
  if (w.pixel_noise > 0) n.pixel_sigma = w.pixel_noise;
  if (w.motion_trans_noise > 0) n.odom_trans_sigma = w.motion_trans_noise;
  if (w.motion_rot_noise > 0) n.odom_rot_sigma = w.motion_rot_noise;
  if (w.gravity_noise > 0) n.gravity_sigma = w.gravity_noise;
  return n;
}

namespace detail {

inline double parse_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: '" + key + "' expects a number, got '" + v + "'");
  return d;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  const double d = parse_number(key, v);
  if (d != static_cast<double>(static_cast<long long>(d))) {
    throw Error("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return static_cast<long long>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace detail

/// Applies one key = value setting. Unknown keys are errors.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_integer;
  using detail::parse_number;
  auto& w = c.world;
  auto& s = c.solver;
  if (key == "seed") w.seed = static_cast<std::uint64_t>(parse_integer(key, v));
  else if (key == "preset") w.preset = trajectory_preset_from_string(v);
  else if (key == "frames") w.num_frames = static_cast<int>(parse_integer(key, v));
  else if (key == "frame_dt") w.frame_dt = parse_number(key, v);
  else if (key == "step_length") w.step_length = parse_number(key, v);
  else if (key == "scale") w.scale = parse_number(key, v);
  else if (key == "landmarks_per_frame") w.landmarks_per_frame = parse_number(key, v);
  else if (key == "shell_inner") w.shell_inner = parse_number(key, v);
  else if (key == "shell_outer") w.shell_outer = parse_number(key, v);
  else if (key == "pixel_noise") w.pixel_noise = parse_number(key, v);
  else if (key == "motion_trans_noise") w.motion_trans_noise = parse_number(key, v);
  else if (key == "motion_rot_noise") w.motion_rot_noise = parse_number(key, v);
  else if (key == "gravity_noise") w.gravity_noise = parse_number(key, v);
  else if (key == "noise_free") {
    if (detail::parse_bool(key, v)) {
      w.pixel_noise = w.motion_trans_noise = w.motion_rot_noise = w.gravity_noise = 0.0;
    }
  }
  else if (key == "mean_track_length") w.mean_track_length = parse_number(key, v);
  else if (key == "max_track_length") w.max_track_length = static_cast<int>(parse_integer(key, v));
  else if (key == "max_features") w.max_features = static_cast<int>(parse_integer(key, v));
  else if (key == "focal") w.focal = parse_number(key, v);
  else if (key == "baseline") w.baseline = parse_number(key, v);
  else if (key == "min_depth") w.min_depth = parse_number(key, v);
  else if (key == "max_depth") w.max_depth = parse_number(key, v);
  else if (key == "window_size") s.window_size = static_cast<int>(parse_integer(key, v));
  else if (key == "gauge_mode") s.gauge_mode = gauge_mode_from_string(v);
  else if (key == "zero_tol_factor") s.zero_tol_factor = parse_number(key, v);
  else if (key == "gauge_prior_weight") s.gauge_prior_weight = parse_number(key, v);
  else if (key == "lm_initial_lambda") s.lm.initial_lambda = parse_number(key, v);
  else if (key == "lm_lambda_up") s.lm.lambda_up = parse_number(key, v);
  else if (key == "lm_lambda_down") s.lm.lambda_down = parse_number(key, v);
  else if (key == "lm_max_lambda") s.lm.max_lambda = parse_number(key, v);
  else if (key == "lm_min_lambda") s.lm.min_lambda = parse_number(key, v);
  else if (key == "lm_max_iterations") s.lm.max_iterations = static_cast<int>(parse_integer(key, v));
  else if (key == "lm_function_tolerance") s.lm.function_tolerance = parse_number(key, v);
  else if (key == "lm_parameter_tolerance") s.lm.parameter_tolerance = parse_number(key, v);
  else if (key == "init_trans_perturbation") c.init_trans_perturbation = parse_number(key, v);
  else if (key == "init_rot_perturbation") c.init_rot_perturbation = parse_number(key, v);
  else if (key == "variants") c.variants = parse_variant_list(v);
  else if (key == "output_dir") c.output_dir = v;
  else throw Error("config: unknown key '" + key + "'");
}

/// Parses "key = value" lines; '#' starts a comment.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(c, ss.str(), path);
}

}  // namespace swba
