#pragma once

#include <string>

#include <json.hpp>

#include "swba/graph/types.hpp"

namespace swba {

inline constexpr int kSnapshotSchemaVersion = 1;

namespace detail {

using nlohmann::json;

template <typename Derived>
json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  json entries = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) entries.push_back(static_cast<double>(m(i, j)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

template <typename Scalar>
MatX<Scalar> matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& e = j.at("entries");
  if (rows < 0 || cols < 0 || static_cast<Index>(e.size()) != rows * cols) {
    throw Error("snapshot: matrix entry count does not match its shape");
  }
  MatX<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < cols; ++k) m(i, k) = static_cast<Scalar>(e[i * cols + k].get<double>());
  }
  return m;
}

template <typename Derived>
json vector_to_json(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(static_cast<double>(v(i)));
  return a;
}

template <typename Scalar>
VecX<Scalar> vector_from_json(const json& a) {
  VecX<Scalar> v(static_cast<Index>(a.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = static_cast<Scalar>(a[i].get<double>());
  return v;
}

template <typename Scalar>
json pose_to_json(const Pose<Scalar>& p) {
  return {{"q", {double(p.q.x()), double(p.q.y()), double(p.q.z()), double(p.q.w())}},
          {"t", vector_to_json(p.t)}};
}

template <typename Scalar>
Pose<Scalar> pose_from_json(const json& j) {
  const auto& q = j.at("q");
  const Eigen::Quaternion<Scalar>
      quat(Scalar(q.at(3).get<double>()), Scalar(q.at(0).get<double>()),
           Scalar(q.at(1).get<double>()), Scalar(q.at(2).get<double>()));
  const VecX<Scalar> t = vector_from_json<Scalar>(j.at("t"));
  if (t.size() != 3) throw Error("snapshot: pose translation must have 3 entries");
  Pose<Scalar> p;
  p.q = quat;  // stored quaternions are already normalized; keep bits
  p.t = t;
  return p;
}

}  // namespace detail

template <typename Scalar>
nlohmann::json prior_to_json(const MarginalizationPrior<Scalar>& p) {
  using detail::json;
  json j;
  j["schema_version"] = kSnapshotSchemaVersion;
  j["precision"] = std::string(to_string(precision_of<Scalar>()));
  j["form"] = std::string(to_string(p.form));
  j["frame_ids"] = p.frame_ids;
  json lps = json::array();
  for (const auto& lp : p.lin_points) {
    lps.push_back({{"anchor", detail::pose_to_json(lp.anchor)},
                   {"offset", detail::vector_to_json(lp.offset)}});
  }
  j["lin_points"] = lps;
  if (p.form == PriorForm::kSquared) {
    j["h"] = detail::matrix_to_json(p.h);
    j["b"] = detail::vector_to_json(p.b);
  } else if (p.form == PriorForm::kSqrt) {
    j["j"] = detail::matrix_to_json(p.j);
    j["r"] = detail::vector_to_json(p.r);
  }
  return j;
}

template <typename Scalar>
MarginalizationPrior<Scalar> prior_from_json(const nlohmann::json& j) {
  MarginalizationPrior<Scalar> p;
  const std::string form = j.at("form").get<std::string>();
  p.frame_ids = j.at("frame_ids").get<std::vector<FrameId>>();
  for (const auto& lp : j.at("lin_points")) {
    ChartPoint<Scalar> c;
    c.anchor = detail::pose_from_json<Scalar>(lp.at("anchor"));
    const VecX<Scalar> off = detail::vector_from_json<Scalar>(lp.at("offset"));
    if (off.size() != 6) throw Error("snapshot: lin point offset must have 6 entries");
    c.offset = off;
    p.lin_points.push_back(c);
  }
  if (form == "squared") {
    p.form = PriorForm::kSquared;
    p.h = detail::matrix_from_json<Scalar>(j.at("h"));
    p.b = detail::vector_from_json<Scalar>(j.at("b"));
  } else if (form == "sqrt") {
    p.form = PriorForm::kSqrt;
    p.j = detail::matrix_from_json<Scalar>(j.at("j"));
    p.r = detail::vector_from_json<Scalar>(j.at("r"));
  } else if (form != "none") {
    throw Error("snapshot: unknown prior form '" + form + "'");
  }
  p.validate();
  return p;
}

template <typename Scalar>
nlohmann::json problem_to_json(const WindowProblem<Scalar>& pb) {
  using detail::json;
  json j;
  j["schema_version"] = kSnapshotSchemaVersion;
  j["precision"] = std::string(to_string(precision_of<Scalar>()));
  json cams = json::array();
  for (const auto& c : pb.rig.cams) {
    cams.push_back({{"fx", double(c.fx)}, {"fy", double(c.fy)}, {"cx", double(c.cx)},
                    {"cy", double(c.cy)}, {"width", c.width}, {"height", c.height},
                    {"t_body_cam", detail::pose_to_json(c.t_body_cam)}});
  }
  j["rig"] = cams;
  json frames = json::array();
  for (const auto& f : pb.frames) {
    frames.push_back({{"id", f.id}, {"timestamp", f.timestamp},
                      {"pose", detail::pose_to_json(f.pose)}, {"frozen", f.frozen},
                      {"lin", detail::pose_to_json(f.lin)},
                      {"delta", detail::vector_to_json(f.delta)}});
  }
  j["frames"] = frames;
  json lms = json::array();
  for (const auto& [id, l] : pb.landmarks) {
    lms.push_back({{"id", id}, {"host", l.host}, {"param", detail::vector_to_json(l.param)},
                   {"lost", l.lost}});
  }
  j["landmarks"] = lms;
  json res = json::array();
  for (const auto& r : pb.residuals) {
    res.push_back({{"kind", std::string(to_string(r.kind))}, {"frames", r.frames},
                   {"landmark", r.landmark}, {"camera", r.camera},
                   {"measurement", detail::vector_to_json(r.measurement)},
                   {"weight_sqrt", detail::matrix_to_json(r.weight_sqrt)}});
  }
  j["residuals"] = res;
  j["prior"] = prior_to_json(pb.prior);
  return j;
}

template <typename Scalar>
WindowProblem<Scalar> problem_from_json(const nlohmann::json& j) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSnapshotSchemaVersion) {
    throw Error("snapshot: unsupported or missing schema_version");
  }
  WindowProblem<Scalar> pb;
  const auto& cams = j.at("rig");
  if (cams.size() != 2) throw Error("snapshot: rig must have two cameras");
  for (int c = 0; c < 2; ++c) {
    const auto& cj = cams[c];
    auto& cam = pb.rig.cams[c];
    cam.fx = Scalar(cj.at("fx").get<double>());
    cam.fy = Scalar(cj.at("fy").get<double>());
    cam.cx = Scalar(cj.at("cx").get<double>());
    cam.cy = Scalar(cj.at("cy").get<double>());
    cam.width = cj.at("width").get<int>();
    cam.height = cj.at("height").get<int>();
    cam.t_body_cam = detail::pose_from_json<Scalar>(cj.at("t_body_cam"));
  }
  for (const auto& fj : j.at("frames")) {
    FrameState<Scalar> f;
    f.id = fj.at("id").get<FrameId>();
    f.timestamp = fj.at("timestamp").get<double>();
    f.pose = detail::pose_from_json<Scalar>(fj.at("pose"));
    f.frozen = fj.at("frozen").get<bool>();
    f.lin = detail::pose_from_json<Scalar>(fj.at("lin"));
    const VecX<Scalar> d = detail::vector_from_json<Scalar>(fj.at("delta"));
    if (d.size() != 6) throw Error("snapshot: frame delta must have 6 entries");
    f.delta = d;
    pb.frames.push_back(f);
  }
  for (const auto& lj : j.at("landmarks")) {
    Landmark<Scalar> l;
    l.id = lj.at("id").get<LandmarkId>();
    l.host = lj.at("host").get<FrameId>();
    const VecX<Scalar> p = detail::vector_from_json<Scalar>(lj.at("param"));
    if (p.size() != 3) throw Error("snapshot: landmark param must have 3 entries");
    l.param = p;
    l.lost = lj.at("lost").get<bool>();
    pb.landmarks[l.id] = l;
  }
  for (const auto& rj : j.at("residuals")) {
    ResidualBlock<Scalar> r;
    r.kind = residual_kind_from_string(rj.at("kind").get<std::string>());
    r.frames = rj.at("frames").get<std::vector<FrameId>>();
    r.landmark = rj.at("landmark").get<LandmarkId>();
    r.camera = rj.at("camera").get<int>();
    r.measurement = detail::vector_from_json<Scalar>(rj.at("measurement"));
    r.weight_sqrt = detail::matrix_from_json<Scalar>(rj.at("weight_sqrt"));
    pb.residuals.push_back(std::move(r));
  }
  pb.prior = prior_from_json<Scalar>(j.at("prior"));
  pb.validate();
  return pb;
}

}  // namespace swba
