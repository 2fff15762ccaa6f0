#pragma once

// The two experiment runners: calibration error over camera distance, and
// the cube localization accuracy. Runs execute in parallel; each owns its
// seed and results are gathered in a fixed order, so reports do not depend
// on the thread count.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "uscal/config.hpp"

namespace uscal {

/// Runs f(0) .. f(n - 1) on up to `threads` workers (0 = hardware threads).
void parallel_for(int n, int threads, const std::function<void(int)>& f);

struct SweepRun {
  double distance_mm = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  CalibrationReport report;
  CalibrationAccuracy accuracy;
  int n_frames_dropped = 0;
};

struct SweepRow {
  double distance_mm = 0.0;
  int n_runs = 0;
  int n_failed = 0;
  double error_mean = 0.0;  // mean over successful runs of the held-out error mean
  double error_sd = 0.0;    // sample sd of the same over runs
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepRun> runs;  // ordered by (distance, repeat)
};

/// One calibration session per (distance, repeat) with seed = config.seed +
/// run_index, run_index = distance_index * repeats + repeat. A failing run is
/// logged and marked failed; the sweep continues.
SweepReport run_distance_sweep(const ExperimentConfig& config, int threads = 1);

struct CubeRunResult {
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  CubeEvalReport report;
  int n_frames = 0;
  int n_frames_lost = 0;
  /// Held-out error of the in-run calibration, when one was made.
  std::optional<double> calibration_error_mean;
};

/// Cube evaluation per run with seed = config.seed + run. With no
/// `calibration`, each run first calibrates on its own simulated session
/// (when cube_runs.calibrate_in_run allows it, else ConfigError).
std::vector<CubeRunResult> run_cube_eval(const ExperimentConfig& config,
                                         const std::optional<CalibrationMatrix>& calibration,
                                         int threads = 1);

/// Seed of the in-run calibration session of cube run `run_seed`.
std::uint64_t cube_calibration_seed(std::uint64_t run_seed);

nlohmann::json to_json(const SweepReport& report);
nlohmann::json to_json(const std::vector<CubeRunResult>& rows);
std::string sweep_table_csv(const SweepReport& report);
std::string cube_table_csv(const std::vector<CubeRunResult>& rows);

}  // namespace uscal
