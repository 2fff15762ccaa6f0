#pragma once

// Experiment configuration: one JSON document (schema "uscal.config/1")
// describing the scene, the sensors, the processing parameters and the two
// experiments. Every block is optional and falls back to the built-in
// defaults; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "uscal/eval.hpp"
#include "uscal/session.hpp"

namespace uscal {

struct SweepSpec {
  std::vector<double> distances_mm{500.0, 600.0, 700.0, 800.0};
  int repeats = 20;
};

struct CubeRunSpec {
  int runs = 5;
  /// Calibration JSON to use; empty means calibrate in-run when allowed.
  std::string calibration_file;
  bool calibrate_in_run = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  CalibrationScenario calibration;
  SweepSpec sweep;
  CubeScenario cube;
  CubeRunSpec cube_runs;

  [[nodiscard]] ProcessingParams processing() const;
  /// Zero depth noise, speckle and detection noise in both scenarios.
  [[nodiscard]] static ExperimentConfig noiseless();
};

inline constexpr double kMinDistanceMm = 300.0;
inline constexpr double kMaxDistanceMm = 1000.0;
inline constexpr double kWarnBelowMm = 400.0;
inline constexpr double kWarnAboveMm = 800.0;

/// ConfigError outside [300, 1000] mm; logs a warning outside [400, 800] mm
/// and returns false there.
bool check_camera_distance(double mm, std::string_view what);

/// Strict parse; any problem is a ConfigError, a wrong schema tag a
/// VersionMismatch.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full effective configuration; config_from_json(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);

nlohmann::json to_json(const NWireParams& p);
nlohmann::json to_json(const MarkerParams& p);
nlohmann::json to_json(const CameraIntrinsics& k);
nlohmann::json to_json(const ImageGeometry& g);
NWireParams nwire_params_from_json(const nlohmann::json& j);
MarkerParams marker_params_from_json(const nlohmann::json& j);
CameraIntrinsics camera_from_json(const nlohmann::json& j);
ImageGeometry image_geometry_from_json(const nlohmann::json& j);

}  // namespace uscal
