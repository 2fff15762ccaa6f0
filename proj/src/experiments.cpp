#include "uscal/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "uscal/error.hpp"
#include "uscal/io.hpp"

namespace uscal {

namespace {

constexpr std::uint64_t kCubeCalibrationStream = 20;

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats mean_sd(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

Json nullable(bool present, double v) { return present ? Json(v) : Json(nullptr); }

}  // namespace

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  if (n <= 0) return;
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

SweepReport run_distance_sweep(const ExperimentConfig& config, int threads) {
  const SweepSpec& spec = config.sweep;
  if (spec.distances_mm.empty()) throw Error(ErrorKind::ConfigError, "sweep needs at least one distance");
  if (spec.repeats < 2) throw Error(ErrorKind::ConfigError, "sweep needs at least 2 repeats");
  for (double d : spec.distances_mm) check_camera_distance(d, "sweep");

  const int n_runs = static_cast<int>(spec.distances_mm.size()) * spec.repeats;
  SweepReport report;
  report.runs.resize(static_cast<std::size_t>(n_runs));
  const ProcessingParams params = config.processing();

  parallel_for(n_runs, threads, [&](int index) {
    SweepRun& run = report.runs[static_cast<std::size_t>(index)];
    run.distance_mm = spec.distances_mm[static_cast<std::size_t>(index / spec.repeats)];
    run.repeat = index % spec.repeats;
    run.seed = config.seed + static_cast<std::uint64_t>(index);
    try {
      CalibrationScenario scenario = config.calibration;
      scenario.camera_distance_mm = run.distance_mm;
      const SimulatedSession session(scenario, run.seed);
      const CalibrationOutcome outcome =
          process_session(session.setup(), [&](int k) { return session.frame(k); }, params);
      if (outcome.n_heldout == 0) throw Error(ErrorKind::ConfigError, "no held-out frames to score");
      run.report = outcome.report;
      run.accuracy = compare_calibration(session.truth().calibration, outcome.report.matrix);
      run.n_frames_dropped = outcome.n_frames_dropped;
      run.ok = true;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigError) throw;
      run.error = e.what();
      spdlog::error("sweep run {} ({} mm, seed {}) failed: {}", index, run.distance_mm, run.seed, e.what());
    }
  });

  for (std::size_t d = 0; d < spec.distances_mm.size(); ++d) {
    SweepRow row;
    row.distance_mm = spec.distances_mm[d];
    std::vector<double> errors;
    for (int r = 0; r < spec.repeats; ++r) {
      const SweepRun& run = report.runs[d * static_cast<std::size_t>(spec.repeats) + static_cast<std::size_t>(r)];
      ++row.n_runs;
      if (run.ok) {
        errors.push_back(run.report.error_mean);
      } else {
        ++row.n_failed;
      }
    }
    const Stats s = mean_sd(errors);
    row.error_mean = s.mean;
    row.error_sd = s.sd;
    report.rows.push_back(row);
  }
  return report;
}

std::uint64_t cube_calibration_seed(std::uint64_t run_seed) {
  return derive_seed(run_seed, kCubeCalibrationStream, 0);
}

std::vector<CubeRunResult> run_cube_eval(const ExperimentConfig& config,
                                         const std::optional<CalibrationMatrix>& calibration, int threads) {
  if (!calibration && !config.cube_runs.calibrate_in_run) {
    throw Error(ErrorKind::ConfigError, "no calibration file given and in-run calibration is disabled");
  }
  check_camera_distance(config.cube.camera_distance_mm, "cube");
  if (config.cube_runs.runs < 1) throw Error(ErrorKind::ConfigError, "cube evaluation needs at least one run");

  std::vector<CubeRunResult> rows(static_cast<std::size_t>(config.cube_runs.runs));
  const ProcessingParams params = config.processing();
  parallel_for(config.cube_runs.runs, threads, [&](int index) {
    CubeRunResult& row = rows[static_cast<std::size_t>(index)];
    row.run = index;
    row.seed = config.seed + static_cast<std::uint64_t>(index);
    try {
      CalibrationMatrix matrix;
      if (calibration) {
        matrix = *calibration;
      } else {
        const SimulatedSession session(config.calibration, cube_calibration_seed(row.seed));
        const CalibrationOutcome outcome =
            process_session(session.setup(), [&](int k) { return session.frame(k); }, params);
        matrix = outcome.report.matrix;
        if (outcome.n_heldout > 0) row.calibration_error_mean = outcome.report.error_mean;
      }
      const CubeEvalRun run = simulate_cube_evaluation(config.cube, matrix, row.seed);
      row.report = run.report;
      row.n_frames = run.n_frames;
      row.n_frames_lost = run.n_frames_lost;
      row.ok = true;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigError) throw;
      row.error = e.what();
      spdlog::error("cube run {} (seed {}) failed: {}", index, row.seed, e.what());
    }
  });
  return rows;
}

Json to_json(const SweepReport& report) {
  Json rows = Json::array();
  for (const SweepRow& r : report.rows) {
    const int n_ok = r.n_runs - r.n_failed;
    rows.push_back({{"distance_mm", r.distance_mm},
                    {"n_runs", r.n_runs},
                    {"n_failed", r.n_failed},
                    {"error_mean_mm", nullable(n_ok > 0, r.error_mean)},
                    {"error_sd_mm", nullable(n_ok > 1, r.error_sd)}});
  }
  Json runs = Json::array();
  for (const SweepRun& r : report.runs) {
    Json j{{"distance_mm", r.distance_mm}, {"repeat", r.repeat}, {"seed", r.seed}, {"ok", r.ok}};
    if (r.ok) {
      j["error_mean_mm"] = r.report.error_mean;
      j["error_sd_mm"] = r.report.error_sd;
      j["rms_fit_mm"] = r.report.rms_fit;
      j["n_frames"] = r.report.n_frames;
      j["n_frames_dropped"] = r.n_frames_dropped;
      j["translation_error_mm"] = r.accuracy.translation_mm;
      j["rotation_error_deg"] = r.accuracy.rotation_deg;
      j["scale_error_rel"] = r.accuracy.scale_rel;
    } else {
      j["error"] = r.error;
    }
    runs.push_back(j);
  }
  return Json{{"schema", schema::kSweep}, {"rows", rows}, {"runs", runs}};
}

Json to_json(const std::vector<CubeRunResult>& rows) {
  Json out = Json::array();
  for (const CubeRunResult& r : rows) {
    Json j{{"run", r.run}, {"seed", r.seed}, {"ok", r.ok}};
    if (r.ok) {
      j.update(to_json(r.report));
      j["n_frames"] = r.n_frames;
      j["n_frames_lost"] = r.n_frames_lost;
      if (r.calibration_error_mean) j["calibration_error_mean_mm"] = *r.calibration_error_mean;
    } else {
      j["error"] = r.error;
    }
    out.push_back(j);
  }
  return Json{{"schema", schema::kCubeEval}, {"rows", out}};
}

std::string sweep_table_csv(const SweepReport& report) {
  std::string out = "distance_mm,n_runs,n_failed,error_mean_mm,error_sd_mm\n";
  for (const SweepRow& r : report.rows) {
    const int n_ok = r.n_runs - r.n_failed;
    out += format_number(r.distance_mm) + "," + std::to_string(r.n_runs) + "," + std::to_string(r.n_failed) + "," +
           (n_ok > 0 ? format_number(r.error_mean) : "") + "," + (n_ok > 1 ? format_number(r.error_sd) : "") + "\n";
  }
  return out;
}

std::string cube_table_csv(const std::vector<CubeRunResult>& rows) {
  std::string out = "run,seed,ok,icp_residue_mm,center_offset_mm,euler_x_deg,euler_y_deg,euler_z_deg,n_points\n";
  for (const CubeRunResult& r : rows) {
    out += std::to_string(r.run) + "," + std::to_string(r.seed) + "," + (r.ok ? "1" : "0");
    if (r.ok) {
      const CubeEvalReport& c = r.report;
      out += "," + format_number(c.icp_residue) + "," + format_number(c.center_offset) + "," +
             format_number(c.euler_offsets[0]) + "," + format_number(c.euler_offsets[1]) + "," +
             format_number(c.euler_offsets[2]) + "," + std::to_string(c.n_points);
    } else {
      out += ",,,,,,";
    }
    out += "\n";
  }
  return out;
}

}  // namespace uscal
