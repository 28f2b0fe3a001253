#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "swba/eval/diagnostics.hpp"
#include "swba/geometry/se3.hpp"

namespace swba {

class ParseError : public Error {
 public:
  using Error::Error;
};

struct StampedPose {
  double timestamp = 0.0;
  Pose<double> pose;
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One line per pose: "timestamp tx ty tz qx qy qz qw".
inline std::string format_trajectory(const std::vector<StampedPose>& traj) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& p : traj) {
    const auto& q = p.pose.q;
    const auto& t = p.pose.t;
    const double v[8] = {p.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()};
    for (int i = 0; i < 8; ++i) {
      out += format_double(v[i]);
      out += i == 7 ? '\n' : ' ';
    }
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw Error("failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Parses the trajectory format; `name` is used in error messages.
inline std::vector<StampedPose> parse_trajectory(const std::string& text, const std::string& name) {
  std::vector<StampedPose> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (int i = 0; i < 8; ++i) {
      if (!(ls >> v[i]) || !std::isfinite(v[i])) {
        throw ParseError("parse error in trajectory file '" + name + "' line " +
                         std::to_string(lineno) + ": expected 8 finite numbers");
      }
    }
    std::string extra;
    if (ls >> extra) {
      throw ParseError("parse error in trajectory file '" + name + "' line " +
                       std::to_string(lineno) + ": trailing content");
    }
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw ParseError("parse error in trajectory file '" + name + "' line " +
                       std::to_string(lineno) + ": quaternion is not unit norm");
    }
    out.push_back({v[0], Pose<double>(q, Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  return out;
}

inline std::vector<StampedPose> read_trajectory_file(const std::string& path) {
  return parse_trajectory(read_text_file(path), path);
}

inline constexpr const char* kDiagnosticsHeader =
    "event,sigma_min,tx,ty,tz,roll,pitch,yaw,random,rank,rank_gap";

inline std::string format_diagnostics_csv(const std::vector<DiagnosticsRecord>& recs) {
  std::string out = std::string(kDiagnosticsHeader) + "\n";
  for (const auto& r : recs) {
    out += std::to_string(r.event_index) + ",";
    out += r.sigma_min ? format_double(*r.sigma_min) : std::string();
    for (double p : r.probes) out += "," + format_double(p);
    out += "," + std::to_string(r.prior_rank) + "," + std::to_string(r.rank_gap) + "\n";
  }
  return out;
}

inline std::vector<DiagnosticsRecord> parse_diagnostics_csv(const std::string& text,
                                                            const std::string& name) {
  std::vector<DiagnosticsRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError("parse error in diagnostics file '" + name + "' line " +
                     std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != kDiagnosticsHeader) fail("unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (!line.empty() && line.back() == ',') cols.push_back("");
    if (cols.size() != 11) fail("expected 11 columns");
    DiagnosticsRecord r;
    try {
      r.event_index = std::stoll(cols[0]);
      if (!cols[1].empty()) r.sigma_min = std::stod(cols[1]);
      for (int i = 0; i < kNumProbes; ++i) r.probes[i] = std::stod(cols[2 + i]);
      r.prior_rank = std::stoll(cols[9]);
      r.rank_gap = std::stoll(cols[10]);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    out.push_back(r);
  }
  if (lineno == 0) fail("empty file");
  return out;
}

}  // namespace swba
