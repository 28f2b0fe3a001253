// Command-line front end: simulate worlds, run the variant matrix, check bundles.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <json.hpp>

#include "swba/harness/compare.hpp"
#include "swba/harness/experiment.hpp"
#include "swba/harness/log.hpp"

namespace {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<int> frames;
  std::optional<std::string> variants;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::optional<std::string> gauge_mode;
  bool noise_free = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_variants) {
  app->add_option("--seed", f.seed, "Run seed");
  app->add_option("--preset", f.preset, "Trajectory preset")
      ->check(CLI::IsMember({"circle", "figure8", "randomwalk"}));
  app->add_option("--frames", f.frames, "Number of frames");
  app->add_option("--gauge-mode", f.gauge_mode, "vio_like or vo_like")
      ->check(CLI::IsMember({"vio_like", "vo_like"}));
  app->add_flag("--noise-free", f.noise_free, "Disable all measurement noise");
  if (with_variants) {
    app->add_option("--variants", f.variants,
                    "Comma-separated opt:marg:precision list, or all/double/single");
  }
  app->add_option("-o,--out", f.out, "Output directory");
  app->add_option("-c,--config", f.config, "key = value config file (overrides flags)")
      ->check(CLI::ExistingFile);
}

swba::RunConfig build_config(const CommonFlags& f) {
  swba::RunConfig c;
  c.variants = swba::all_variants();
  if (f.seed) c.world.seed = *f.seed;
  if (f.preset) c.world.preset = swba::trajectory_preset_from_string(*f.preset);
  if (f.frames) c.world.num_frames = *f.frames;
  if (f.gauge_mode) c.solver.gauge_mode = swba::gauge_mode_from_string(*f.gauge_mode);
  if (f.noise_free) swba::apply_setting(c, "noise_free", "true");
  if (f.variants) c.variants = swba::parse_variant_list(*f.variants);
  if (f.out) c.output_dir = *f.out;
  if (f.config) swba::apply_config_file(c, *f.config);
  c.validate();
  return c;
}

int cmd_simulate(const swba::RunConfig& c) {
  namespace fs = std::filesystem;
  const swba::SyntheticWorld w = swba::generate_world(c.world);
  const fs::path root(c.output_dir);
  fs::create_directories(root);
  std::vector<swba::StampedPose> gt;
  for (std::size_t i = 0; i < w.trajectory.size(); ++i) gt.push_back({w.timestamps[i], w.trajectory[i]});
  swba::write_text_file((root / "groundtruth.txt").string(), swba::format_trajectory(gt));

  std::string lms = "# x y z\n";
  for (const auto& p : w.landmarks) {
    lms += swba::format_double(p.x()) + " " + swba::format_double(p.y()) + " " +
           swba::format_double(p.z()) + "\n";
  }
  swba::write_text_file((root / "landmarks.txt").string(), lms);

  std::string meas;
  std::size_t n_obs = 0;
  for (const auto& m : w.frames) {
    nlohmann::json j;
    j["frame"] = m.id;
    j["timestamp"] = m.timestamp;
    if (m.has_odometry) {
      const auto& o = m.odometry;
      j["odometry"] = {o.t.x(), o.t.y(), o.t.z(), o.q.x(), o.q.y(), o.q.z(), o.q.w()};
    }
    if (m.has_gravity) j["gravity"] = {m.gravity.x(), m.gravity.y(), m.gravity.z()};
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : m.observations) obs.push_back({o.track, o.camera, o.pixel.x(), o.pixel.y()});
    n_obs += m.observations.size();
    j["observations"] = obs;
    j["lost_tracks"] = m.lost_tracks;
    meas += j.dump() + "\n";
  }
  swba::write_text_file((root / "measurements.jsonl").string(), meas);
  swba::log(swba::LogLevel::kInfo, "simulated " + std::to_string(w.frames.size()) + " frames, " +
                                       std::to_string(w.landmarks.size()) + " landmarks, " +
                                       std::to_string(n_obs) + " observations into " + c.output_dir);
  return 0;
}

int cmd_run(const swba::RunConfig& c) {
  swba::log(swba::LogLevel::kInfo, "running " + std::to_string(c.variants.size()) + " variants on " +
                                       std::to_string(c.world.num_frames) + " frames, seed " +
                                       std::to_string(c.seed()));
  const swba::ExperimentReport rep = swba::run_experiment(c);
  for (const auto& r : rep.results) {
    const std::string status = r.failed ? "FAILED (" + r.failure_reason + ")" : "ok";
    swba::log(r.failed ? swba::LogLevel::kWarn : swba::LogLevel::kInfo,
              r.spec.name() + ": ATE " + swba::format_double(r.ate) + " m, " + status);
  }
  std::cout << rep.table;
  swba::log(swba::LogLevel::kDebug, "phase timings\n" + rep.timing_table);
  swba::log(swba::LogLevel::kInfo, "bundle written to " + c.output_dir);
  return 0;
}

int cmd_compare(const std::string& dir) {
  const swba::CompareVerdict v = swba::compare_reports(dir);
  std::cout << v.format();
  return v.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sliding-window bundle adjustment with square-root marginalization"};
  app.require_subcommand(1);

  CommonFlags sim_flags, run_flags;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic world and its measurements");
  add_common(sim, sim_flags, false);
  auto* run = app.add_subcommand("run", "Run the selected estimator variants and write a report bundle");
  add_common(run, run_flags, true);
  std::string bundle = "out";
  auto* cmp = app.add_subcommand("compare", "Check a report bundle against the acceptance assertions");
  cmp->add_option("bundle", bundle, "Bundle directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(build_config(sim_flags));
    if (*run) return cmd_run(build_config(run_flags));
    if (*cmp) return cmd_compare(bundle);
  } catch (const std::exception& e) {
    swba::log(swba::LogLevel::kError, e.what());
    return 2;
  }
  return 0;
}
