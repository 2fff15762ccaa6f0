// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <spdlog/spdlog.h>

#include "support.hpp"
#include "uscal/config.hpp"
#include "uscal/error.hpp"
#include "uscal/eval.hpp"
#include "uscal/experiments.hpp"
#include "uscal/io.hpp"
#include "uscal/overlay.hpp"
#include "uscal/session.hpp"

namespace fs = std::filesystem;
using namespace uscal;
using uscal::test::Gen;
using uscal::test::rotation_error_deg;

namespace {

// Pinned tolerances.
constexpr double kCalibTranslationMm = 0.1;
constexpr double kCalibRotationDeg = 0.1;
constexpr double kCalibScaleRel = 1e-3;
constexpr double kCalibRuntimeS = 60.0;
constexpr double kOracleMm = 1e-9;
constexpr double kUmeyamaTol = 1e-10;
constexpr double kIcpSuccessMm = 0.5;
constexpr double kIcpSuccessDeg = 0.5;
constexpr double kIcpSuccessRate = 0.95;
constexpr double kSweepLowMm = 0.5;
constexpr double kSweepHighMm = 8.0;
constexpr double kSweepRuntimeS = 15.0 * 60.0;
constexpr double kCubeResidueMm = 10.0;
constexpr double kCubeCenterMm = 10.0;
constexpr double kCubeEulerDeg = 6.0;
constexpr double kCubeNoiselessMm = 0.1;
constexpr double kCubeNoiselessDeg = 0.1;
constexpr double kBiasRel = 0.05;
constexpr double kCubeBiasRel = 0.10;
constexpr double kTrackRateHz = 40.0;
constexpr double kRoundTrip = 1e-9;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

template <typename F>
void guarded(int id, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, false, std::string("threw: ") + e.what());
  }
}

void noiseless_calibration() {
  const auto t0 = Clock::now();
  const SimulatedSession s(CalibrationScenario::noiseless(), 1);
  const CalibrationOutcome out = process_session(s.setup(), [&](int k) { return s.frame(k); }, {});
  const double seconds = since(t0);
  const CalibrationAccuracy acc = compare_calibration(s.truth().calibration, out.report.matrix);
  const bool pass = acc.translation_mm < kCalibTranslationMm && acc.rotation_deg < kCalibRotationDeg &&
                    acc.scale_rel < kCalibScaleRel && out.report.n_frames >= 15 && seconds < kCalibRuntimeS;
  report(1, pass,
         fmt("translation %.4f mm, rotation %.4f deg, scale %.5f %%, %.0f calibration frames, %.1f s",
             acc.translation_mm, acc.rotation_deg, 100.0 * acc.scale_rel, out.report.n_frames, seconds));
}

void middle_wire_oracle() {
  const NWireParams params;
  const NWireGeometry geom = make_nwire_geometry(params);
  const ImageGeometry image;
  Gen g(2);
  int tested = 0;
  double worst = 0.0;
  while (tested < 1000) {
    ProbePose pose;
    pose.x0 = g.uniform(8.0, 32.0);
    pose.about_u_deg = g.uniform(-15.0, 15.0);
    pose.about_v_deg = g.uniform(-25.0, 25.0);
    pose.about_n_deg = g.uniform(-10.0, 10.0);
    const RigidTransform t_phantom_from_image = probe_plane_pose(pose, image, params);
    const auto hits = intersect_wires(geom, invert(t_phantom_from_image), image);
    bool in_field = true;
    for (const WireHit& h : hits) in_field = in_field && h.status == HitStatus::InField;
    if (!in_field) continue;
    ++tested;
    const Vec3 n = t_phantom_from_image.rotation.col(2);
    const Vec3 o = t_phantom_from_image.translation;
    for (int l = 0; l < 3; ++l) {
      const double alpha = (hits[3 * l + 1].pixel - hits[3 * l].pixel).norm() /
                           (hits[3 * l + 2].pixel - hits[3 * l].pixel).norm();
      const Segment& d = geom.layers[l].diagonal;
      const Vec3 oracle = d.a + (n.dot(o - d.a) / n.dot(d.b - d.a)) * (d.b - d.a);
      worst = std::max(worst, (middle_point_on_diagonal(geom, l, alpha) - oracle).norm());
    }
  }
  report(2, worst < kOracleMm, fmt("max deviation %.3g mm over %.0f planes", worst, tested));
}

void registration() {
  Gen g(3);
  double worst_t = 0.0, worst_r = 0.0;
  for (int i = 0; i < 100; ++i) {
    const RigidTransform truth = g.transform(500.0);
    std::vector<Vec3> src, dst;
    for (int k = 0; k < 50; ++k) {
      src.push_back(g.vec3(100.0));
      dst.push_back(truth.apply(src.back()));
    }
    const RigidTransform fit = umeyama_fit(src, dst);
    worst_t = std::max(worst_t, (fit.translation - truth.translation).norm());
    worst_r = std::max(worst_r, rotation_error_deg(fit.rotation, truth.rotation));
  }

  const SimulatedSession s(CalibrationScenario::noiseless(), 3);
  const RigidTransform truth = s.truth().t_cam_from_phantom;
  const PointCloud roi = crop_roi(to_point_cloud(s.frame(0).depth), s.setup().phantom_roi_center,
                                  s.setup().phantom_roi_radius);
  const IcpModel model(make_phantom_mesh(s.setup().phantom), IcpParams{}.model_downsample_spacing);
  const Vec3 pivot = truth.apply(model.centroid);
  int ok = 0;
  bool monotone = true;
  for (int seed = 0; seed < 100; ++seed) {
    Gen pg(1000 + static_cast<std::uint64_t>(seed));
    const RigidTransform p = pg.perturbation(pg.uniform(0.0, 10.0), deg2rad(pg.uniform(0.0, 10.0)));
    const RigidTransform init = compose(RigidTransform{p.rotation, pivot - p.rotation * pivot + p.translation}, truth);
    const RegistrationResult r = icp(model, roi, init, IcpParams{});
    for (std::size_t k = 1; k < r.rms_history.size(); ++k) monotone = monotone && r.rms_history[k] <= r.rms_history[k - 1];
    if ((r.pose.translation - truth.translation).norm() < kIcpSuccessMm &&
        rotation_error_deg(r.pose.rotation, truth.rotation) < kIcpSuccessDeg) {
      ++ok;
    }
  }
  const bool pass = worst_t < kUmeyamaTol && worst_r < kUmeyamaTol && ok >= kIcpSuccessRate * 100 && monotone;
  report(3, pass,
         fmt("umeyama max %.2g mm / %.2g deg; ICP %.0f/100 recovered; RMS monotone ", worst_t, worst_r, ok) +
             (monotone ? "yes" : "no"));
}

void distance_sweep() {
  const auto t0 = Clock::now();
  const SweepReport r = run_distance_sweep(ExperimentConfig{}, 0);
  const double seconds = since(t0);
  bool pass = seconds < kSweepRuntimeS;
  std::string detail;
  double last = 0.0;
  for (const SweepRow& row : r.rows) {
    const bool ok = row.n_failed < row.n_runs && row.error_mean >= kSweepLowMm && row.error_mean <= kSweepHighMm &&
                    row.error_mean >= last;
    pass = pass && ok;
    last = row.error_mean;
    detail += fmt("%.0f mm: %.2f +- %.2f (%.0f failed); ", row.distance_mm, row.error_mean, row.error_sd, row.n_failed);
  }
  report(4, pass, detail + fmt("%.0f s", seconds));
}

void cube_evaluation() {
  const auto check = [](const std::vector<CubeRunResult>& rows, double res, double center, double euler,
                        double& worst_res, double& worst_center, double& worst_euler) {
    bool ok = true;
    for (const CubeRunResult& r : rows) {
      if (!r.ok) {
        ok = false;
        continue;
      }
      worst_res = std::max(worst_res, r.report.icp_residue);
      worst_center = std::max(worst_center, r.report.center_offset);
      for (double a : r.report.euler_offsets) worst_euler = std::max(worst_euler, std::abs(a));
    }
    return ok && worst_res < res && worst_center < center && worst_euler < euler;
  };
  double nr = 0, nc = 0, ne = 0, zr = 0, zc = 0, ze = 0;
  const bool noisy = check(run_cube_eval(ExperimentConfig{}, std::nullopt, 0), kCubeResidueMm, kCubeCenterMm,
                           kCubeEulerDeg, nr, nc, ne);
  const bool clean = check(run_cube_eval(ExperimentConfig::noiseless(), std::nullopt, 0), kCubeNoiselessMm,
                           kCubeNoiselessMm, kCubeNoiselessDeg, zr, zc, ze);
  report(5, noisy && clean,
         fmt("5 runs max residue %.2f mm, center %.2f mm, euler %.2f deg; ", nr, nc, ne) +
             fmt("noiseless %.4f mm, %.4f mm, %.4f deg", zr, zc, ze));
}

void injected_bias() {
  const SimulatedSession s(CalibrationScenario::noiseless(), 6);
  const NWireGeometry geom = make_nwire_geometry(s.setup().phantom);
  std::vector<HeldOutFrame> frames;
  for (int k = 0; k < s.setup().n_frames; ++k) {
    if (s.setup().heldout[static_cast<std::size_t>(k)]) {
      frames.push_back({s.frame(k).us, s.truth().t_cam_from_marker[static_cast<std::size_t>(k)]});
    }
  }
  const CalibrationMatrix& truth = s.truth().calibration;
  RigidTransform shifted = truth.marker_from_image();
  shifted.translation += 2.0 * truth.rotation.col(1);  // across the wires
  const CalibrationMatrix biased = CalibrationMatrix::from_decomposition(truth.sx, truth.sy, shifted);
  const double base = calibration_error(truth, frames, geom, s.truth().t_cam_from_phantom).mean;
  const double moved = calibration_error(biased, frames, geom, s.truth().t_cam_from_phantom).mean;
  const double shift = moved - base;

  const BoardModel board = make_board({});
  const CubeEdgeModel model = make_cube_edges(50.0, default_cube_edge_selection());
  const RigidTransform cam = invert(look_at(Vec3(-180, -220, 400), Vec3(0, 0, 25), Vec3(0, 0, -1)));
  const RigidTransform t_cam_from_cube = compose(cam, board.cube_pose_in_world);
  PointCloud points;
  points.frame = "camera";
  for (const Segment& e : model.edges) {
    for (double t = 0.02; t < 1.0; t += 0.04) points.points.push_back(t_cam_from_cube.apply(e.a + t * (e.b - e.a)));
  }
  Gen g(6);
  double worst_rel = 0.0;
  for (int i = 0; i < 10; ++i) {
    const PointCloud offset = transformed(points, RigidTransform::from_translation(3.0 * g.unit()), "camera");
    const CubeEvalReport r = evaluate_cube(offset, model, cam, board.cube_pose_in_world, IcpParams{});
    worst_rel = std::max(worst_rel, std::abs(r.center_offset / 3.0 - 1.0));
  }
  const bool pass = std::abs(shift / 2.0 - 1.0) <= kBiasRel && worst_rel <= kCubeBiasRel;
  report(6, pass, fmt("2 mm bias moves the error by %.3f mm; 3 mm cube offset worst deviation %.2f %%", shift,
                      100.0 * worst_rel));
}

void tracking() {
  const SimulatedSession s(CalibrationScenario{}, 7);
  const SessionSetup& setup = s.setup();
  std::vector<PointCloud> clouds;
  for (int k = 0; k < setup.n_frames; ++k) clouds.push_back(to_point_cloud(s.frame(k).depth));

  const IcpParams params;
  const TriangleMesh phantom = make_phantom_mesh(setup.phantom);
  const RegistrationResult located = localize_model(phantom, clouds[0], setup.phantom_roi_center,
                                                    setup.phantom_roi_radius, params, {setup.phantom_rotation_hint});
  TrackerState frozen = start_tracker(phantom, located, params, true);
  const RigidTransform fixed = frozen.last_pose;
  bool constant = true;
  for (const PointCloud& c : clouds) {
    frozen = track_step(std::move(frozen), c, params).first;
    constant = constant && frozen.last_pose.rotation == fixed.rotation && frozen.last_pose.translation == fixed.translation;
  }

  IcpParams marker_icp = params;
  marker_icp.model_downsample_spacing = 3.0;
  const TriangleMesh marker = make_marker_mesh(setup.marker);
  const RegistrationResult start = localize_model(marker, clouds[0], setup.marker_roi_center, setup.marker_roi_radius,
                                                  marker_icp, {setup.marker_rotation_hint});
  TrackerState tracker = start_tracker(marker, start, marker_icp);
  int steps = 0;
  int lost = 0;
  const auto t0 = Clock::now();
  for (int rep = 0; rep < 3; ++rep) {
    TrackerState t = tracker;
    for (std::size_t k = 1; k < clouds.size(); ++k) {
      t = track_step(std::move(t), clouds[k], marker_icp).first;
      lost += t.lost ? 1 : 0;
      ++steps;
    }
  }
  const double rate = steps / since(t0);

  const PointCloud teleported = transformed(clouds[1], RigidTransform::from_translation(Vec3(300, 0, 0)), "camera");
  const TrackerState after = track_step(tracker, teleported, marker_icp).first;
  const bool pass = constant && rate >= kTrackRateHz && lost == 0 && after.lost;
  report(7, pass,
         std::string("frozen pose constant ") + (constant ? "yes" : "no") +
             fmt("; marker tracking %.1f steps/s, %.0f lost; ", rate, lost) + "teleport detected " +
             (after.lost ? "yes" : "no"));
}

void projection_overlay() {
  const CameraIntrinsics k;
  Gen g(8);
  double worst_px = 0.0, worst_mm = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec2 px(g.uniform(0, k.width - 1), g.uniform(0, k.height - 1));
    const double d = g.uniform(100.0, 3000.0);
    worst_px = std::max(worst_px, (project(k, unproject(k, px, d)) - px).norm());
    const Vec3 p(g.uniform(-300, 300), g.uniform(-300, 300), g.uniform(100, 3000));
    worst_mm = std::max(worst_mm, (unproject(k, project(k, p), p.z()) - p).norm());
  }

  double worst_quad = 0.0;
  for (int i = 0; i < 100; ++i) {
    const CalibrationMatrix m = CalibrationMatrix::from_decomposition(0.1, 0.1, g.transform(50.0));
    const RigidTransform world_from_cam = look_at(g.vec3(50.0) + Vec3(0, 0, -500), g.vec3(20.0), Vec3(0, 1, 0));
    const RigidTransform world_from_marker = RigidTransform::from_translation(g.vec3(20.0));
    const Quad a = image_quad(m, compose(invert(world_from_cam), world_from_marker), k, 512, 512);
    const RigidTransform motion = g.transform(1000.0);
    const Quad b = image_quad(m, compose(invert(compose(motion, world_from_cam)), compose(motion, world_from_marker)),
                              k, 512, 512);
    for (int c = 0; c < 4; ++c) worst_quad = std::max(worst_quad, (a[c] - b[c]).norm());
  }

  RgbFrame rgb(640, 480);
  for (auto& p : rgb.pixels) p = static_cast<std::uint8_t>(g.integer(0, 255));
  const USFrame us = render_us_frame({{Vec2(200, 200), 0}}, ImageGeometry{}, 3.0, {}, 8);
  const Quad quad{Vec2(200, 100), Vec2(420, 120), Vec2(400, 380), Vec2(210, 360)};
  const bool identical = composite(rgb, us, quad, "hot", 0.0).pixels == rgb.pixels;

  const bool pass = worst_px < kRoundTrip && worst_mm < kRoundTrip && worst_quad < kRoundTrip && identical;
  report(8, pass,
         fmt("round trips %.2g px / %.2g mm; quad invariance %.2g px; ", worst_px, worst_mm, worst_quad) +
             "opacity-0 identical " + (identical ? "yes" : "no"));
}

std::string file_bytes(const fs::path& p) { return read_text(p); }

void determinism(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / ("uscal_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  ExperimentConfig c;
  c.seed = 9;
  c.calibration.trajectory = default_trajectory(8);
  c.sweep.distances_mm = {500.0, 700.0};
  c.sweep.repeats = 2;
  c.cube.planes_per_edge = 6;
  c.cube_runs.runs = 3;
  write_json(dir / "config.json", to_json(c));

  const auto run = [&](const std::string& sub, int threads, const std::string& out) {
    const std::string cmd = cli + " " + sub + " --config " + (dir / "config.json").string() + " --deterministic --threads " +
                            std::to_string(threads) + " --out " + (dir / out).string() + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool ran = run("sweep-distance", 1, "s1") && run("sweep-distance", 4, "s4") && run("sweep-distance", 4, "s4b") &&
             run("evaluate-cube", 1, "c1") && run("evaluate-cube", 3, "c3");
  bool same = false;
  if (ran) {
    same = file_bytes(dir / "s1/sweep.json") == file_bytes(dir / "s4/sweep.json") &&
           file_bytes(dir / "s4/sweep.json") == file_bytes(dir / "s4b/sweep.json") &&
           file_bytes(dir / "s1/sweep.csv") == file_bytes(dir / "s4/sweep.csv") &&
           file_bytes(dir / "c1/cube_eval.json") == file_bytes(dir / "c3/cube_eval.json") &&
           file_bytes(dir / "c1/cube_eval.csv") == file_bytes(dir / "c3/cube_eval.csv");
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  report(9, ran && same,
         std::string("sweep and cube reports with 1 vs several threads: ") +
             (!ran ? "a run failed" : same ? "byte-identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::string cli = argc > 1 ? argv[1] : "uscal";
  guarded(1, noiseless_calibration);
  guarded(2, middle_wire_oracle);
  guarded(3, registration);
  guarded(4, distance_sweep);
  guarded(5, cube_evaluation);
  guarded(6, injected_bias);
  guarded(7, tracking);
  guarded(8, projection_overlay);
  guarded(9, [&] { determinism(cli); });
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
