// uscal: simulate, calibrate, track, evaluate and overlay from the command line.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "uscal/config.hpp"
#include "uscal/error.hpp"
#include "uscal/experiments.hpp"
#include "uscal/io.hpp"
#include "uscal/overlay.hpp"
#include "uscal/session.hpp"

namespace fs = std::filesystem;
using namespace uscal;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool deterministic = false;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_threads) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "base seed, overrides the config");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_flag("--deterministic", c.deterministic, "leave timestamps and timings out of reports");
  if (with_threads) cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig config = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  return config;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Report envelope: the payload plus the effective config and, unless
// deterministic, when and how long.
Json envelope(Json payload, const ExperimentConfig& config, const Common& c, double seconds) {
  payload["seed"] = config.seed;
  payload["config"] = to_json(config);
  if (!c.deterministic) {
    payload["generated_at"] = utc_now();
    payload["runtime_s"] = seconds;
    payload["threads"] = c.threads;
  }
  return payload;
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int simulate_calibration(const Common& c) {
  const ExperimentConfig config = load(c);
  check_camera_distance(config.calibration.camera_distance_mm, "calibration");
  const SimulatedSession session(config.calibration, config.seed);
  write_session(c.out, session.setup(), [&](int k) { return session.frame(k); }, &session.truth());
  write_json(fs::path(c.out) / "config.json", to_json(config));
  std::printf("session with %d frames written to %s\n", session.setup().n_frames, c.out.c_str());
  return 0;
}

int calibrate(const Common& c, const std::string& session_dir) {
  const ExperimentConfig config = load(c);
  const SessionSetup setup = read_session_setup(session_dir);
  const CalibrationOutcome outcome = process_session(setup, session_frames(session_dir, setup), config.processing());
  write_json(fs::path(c.out) / "calibration.json", to_json(outcome.report));
  write_text(fs::path(c.out) / "poses.csv", format_pose_csv(outcome.poses));
  const CalibrationReport& r = outcome.report;
  std::printf("sx %.6f  sy %.6f mm/px  fit rms %.4f mm  frames %d (%d dropped)\n", r.matrix.sx, r.matrix.sy,
              r.rms_fit, r.n_frames, outcome.n_frames_dropped);
  if (outcome.n_heldout > 0) {
    std::printf("held-out error %.4f +- %.4f mm over %d frames\n", r.error_mean, r.error_sd, outcome.n_heldout);
  }
  const Json session = read_json(fs::path(session_dir) / "session.json");
  if (session.contains("truth")) {
    const CalibrationMatrix truth = calibration_report_from_json(session["truth"]["calibration"]).matrix;
    const CalibrationAccuracy acc = compare_calibration(truth, r.matrix);
    std::printf("vs truth: translation %.4f mm  rotation %.4f deg  scale %.5f %%\n", acc.translation_mm,
                acc.rotation_deg, 100.0 * acc.scale_rel);
  }
  return 0;
}

int sweep_distance(const Common& c) {
  const ExperimentConfig config = load(c);
  const auto t0 = std::chrono::steady_clock::now();
  const SweepReport report = run_distance_sweep(config, c.threads);
  write_json(fs::path(c.out) / "sweep.json", envelope(to_json(report), config, c, since(t0)));
  const std::string table = sweep_table_csv(report);
  write_text(fs::path(c.out) / "sweep.csv", table);
  std::printf("distance_mm  error_mm (mean +- sd)  failed\n");
  for (const SweepRow& row : report.rows) {
    std::printf("%11.0f  %8.3f +- %-8.3f  %d/%d\n", row.distance_mm, row.error_mean, row.error_sd, row.n_failed,
                row.n_runs);
  }
  return 0;
}

int evaluate_cube(const Common& c, const std::string& calibration_file) {
  const ExperimentConfig config = load(c);
  std::string file = calibration_file.empty() ? config.cube_runs.calibration_file : calibration_file;
  std::optional<CalibrationMatrix> matrix;
  if (!file.empty()) {
    if (!fs::exists(file)) {
      if (!config.cube_runs.calibrate_in_run) {
        throw Error(ErrorKind::ConfigError, "calibration file " + file + " not found");
      }
      throw Error(ErrorKind::IoError, "calibration file " + file + " not found");
    }
    matrix = calibration_report_from_json(read_json(file)).matrix;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_cube_eval(config, matrix, c.threads);
  write_json(fs::path(c.out) / "cube_eval.json", envelope(to_json(rows), config, c, since(t0)));
  write_text(fs::path(c.out) / "cube_eval.csv", cube_table_csv(rows));
  std::printf("run  residue_mm  center_mm  euler_deg (x, y, z)\n");
  for (const CubeRunResult& r : rows) {
    if (!r.ok) {
      std::printf("%3d  failed: %s\n", r.run, r.error.c_str());
      continue;
    }
    const CubeEvalReport& e = r.report;
    std::printf("%3d  %10.3f  %9.3f  %.2f, %.2f, %.2f\n", r.run, e.icp_residue, e.center_offset, e.euler_offsets[0],
                e.euler_offsets[1], e.euler_offsets[2]);
  }
  return 0;
}

int track(const Common& c, const std::string& session_dir) {
  const ExperimentConfig config = load(c);
  const SessionSetup setup = read_session_setup(session_dir);
  const auto poses = track_marker(setup, session_frames(session_dir, setup), config.calibration.icp);
  write_text(fs::path(c.out) / "poses.csv", format_pose_csv(poses));
  int lost = 0;
  for (const TrackedPose& p : poses) lost += p.lost ? 1 : 0;
  std::printf("%zu frames tracked, %d lost\n", poses.size(), lost);
  return 0;
}

struct OverlayArgs {
  std::string session;
  std::string calibration;
  std::string poses;
  std::string rgb;
  std::string colormap = "hot";
  double opacity = 0.85;
  int frame = -1;
};

int overlay(const Common& c, const OverlayArgs& a) {
  const SessionSetup setup = read_session_setup(a.session);
  const FrameProvider frames = session_frames(a.session, setup);
  const CalibrationMatrix matrix = calibration_report_from_json(read_json(a.calibration)).matrix;
  const std::vector<TrackedPose> poses = a.poses.empty()
                                             ? track_marker(setup, frames, load(c).calibration.icp)
                                             : parse_pose_csv(read_text(a.poses));
  int written = 0;
  for (const TrackedPose& p : poses) {
    if (a.frame >= 0 && p.frame != a.frame) continue;
    if (p.lost) {
      spdlog::warn("frame {}: no marker pose, skipped", p.frame);
      continue;
    }
    const SessionFrame f = frames(p.frame);
    const RgbFrame background = a.rgb.empty() ? shade_depth(f.depth) : read_ppm(a.rgb);
    const Quad quad = image_quad(matrix, p.t_cam_from_marker, setup.camera, f.us.width, f.us.height);
    char name[32];
    std::snprintf(name, sizeof name, "overlay_%03d.ppm", p.frame);
    write_ppm(fs::path(c.out) / name, composite(background, f.us, quad, a.colormap, a.opacity));
    ++written;
  }
  if (written == 0) throw Error(ErrorKind::InvalidArgument, "no frame to overlay");
  std::printf("%d overlay frames written to %s\n", written, c.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("uscal"));

  CLI::App app{"Depth-camera ultrasound probe calibration"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  Common common;
  std::string session_dir;
  std::string calibration_file;
  OverlayArgs ov;

  auto* sim = app.add_subcommand("simulate-calibration", "render a calibration session to disk");
  add_common(sim, common, false);
  auto* cal = app.add_subcommand("calibrate", "calibrate from a recorded session");
  add_common(cal, common, false);
  cal->add_option("--session", session_dir, "session directory")->required();
  auto* sweep = app.add_subcommand("sweep-distance", "calibration error over camera distance");
  add_common(sweep, common, true);
  auto* cube = app.add_subcommand("evaluate-cube", "cube localization accuracy");
  add_common(cube, common, true);
  cube->add_option("--calibration", calibration_file, "calibration JSON; calibrate in-run when omitted");
  auto* trk = app.add_subcommand("track", "track the marker through a recorded session");
  add_common(trk, common, false);
  trk->add_option("--session", session_dir, "session directory")->required();
  auto* ovl = app.add_subcommand("overlay", "composite ultrasound frames into the camera view");
  add_common(ovl, common, false);
  ovl->add_option("--session", ov.session, "session directory")->required();
  ovl->add_option("--calibration", ov.calibration, "calibration JSON")->required();
  ovl->add_option("--poses", ov.poses, "pose CSV; tracked from the session when omitted");
  ovl->add_option("--rgb", ov.rgb, "color frame (PPM); shaded depth when omitted");
  ovl->add_option("--frame", ov.frame, "single frame index");
  ovl->add_option("--colormap", ov.colormap, "hot or gray");
  ovl->add_option("--opacity", ov.opacity, "blend opacity in [0, 1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    std::error_code ec;
    fs::create_directories(common.out, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + common.out + ": " + ec.message());
    if (*sim) return simulate_calibration(common);
    if (*cal) return calibrate(common, session_dir);
    if (*sweep) return sweep_distance(common);
    if (*cube) return evaluate_cube(common, calibration_file);
    if (*trk) return track(common, session_dir);
    if (*ovl) return overlay(common, ov);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
