#pragma once

// File formats: OBJ meshes, XYZ clouds, PGM/PPM images, pose and annotation
// CSVs, JSON reports, and the on-disk layout of a recorded session.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "uscal/calib.hpp"
#include "uscal/depthsim.hpp"
#include "uscal/eval.hpp"
#include "uscal/overlay.hpp"
#include "uscal/scene.hpp"
#include "uscal/session.hpp"
#include "uscal/ussim.hpp"

namespace uscal {

using Json = nlohmann::json;

namespace schema {
inline constexpr std::string_view kConfig = "uscal.config/1";
inline constexpr std::string_view kCalibration = "uscal.calibration/1";
inline constexpr std::string_view kSession = "uscal.session/1";
inline constexpr std::string_view kSweep = "uscal.sweep/1";
inline constexpr std::string_view kCubeEval = "uscal.cube_eval/1";
}  // namespace schema

/// Shortest text that parses back to the same double.
std::string format_number(double v);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Parse failures become ParseError; a missing or different "schema" tag is
/// VersionMismatch.
Json parse_json(std::string_view text, std::string_view source = "json");
Json read_json(const std::filesystem::path& path);
/// Two-space indent, trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
void check_schema(const Json& j, std::string_view expected);

// --- meshes and clouds ------------------------------------------------------

/// Vertices ("v") and triangular faces ("f", 1-based or negative indices,
/// texture/normal refs ignored). Faces with more than three vertices are
/// rejected with a ParseError naming the line.
TriangleMesh parse_obj(std::string_view text);
std::string format_obj(const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// One "x y z" per line; '#' starts a comment.
PointCloud parse_xyz(std::string_view text);
std::string format_xyz(const PointCloud& cloud);
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

// --- images -----------------------------------------------------------------

/// 8-bit binary PGM (P5). Pixel spacing is not stored; the reader leaves the
/// USFrame defaults.
void write_pgm(const std::filesystem::path& path, const USFrame& frame);
USFrame read_pgm(const std::filesystem::path& path);

/// 16-bit big-endian P5 with one unit = 0.1 mm; 0 = no return.
inline constexpr double kDepthUnitMm = 0.1;
void write_depth_pgm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth_pgm(const std::filesystem::path& path, const CameraIntrinsics& k);

void write_ppm(const std::filesystem::path& path, const RgbFrame& frame);
RgbFrame read_ppm(const std::filesystem::path& path);

// --- CSV ----------------------------------------------------------------------

inline constexpr std::string_view kPoseCsvHeader = "frame,t_s,tx_mm,ty_mm,tz_mm,qw,qx,qy,qz,rms_mm,lost";

/// t_s = frame * frame_interval_s. Quaternions are written with qw >= 0.
std::string format_pose_csv(const std::vector<TrackedPose>& poses, double frame_interval_s = 1.0 / 30.0);
/// Rejects quaternions whose norm is off by more than 1e-6.
std::vector<TrackedPose> parse_pose_csv(std::string_view text);

inline constexpr std::string_view kAnnotationCsvHeader = "frame,u,v,id";

struct AnnotationRow {
  int frame = 0;
  UsSpot spot;
};

std::string format_annotations_csv(const std::vector<AnnotationRow>& rows);
std::vector<AnnotationRow> parse_annotations_csv(std::string_view text);

// --- JSON payloads ----------------------------------------------------------

Json to_json(const RigidTransform& t);
RigidTransform rigid_from_json(const Json& j);

/// Tagged calibration file: matrix_row_major, sx, sy, the rigid part and the
/// fit statistics.
Json to_json(const CalibrationReport& report);
CalibrationReport calibration_report_from_json(const Json& j);

Json to_json(const CubeEvalReport& report);

// --- recorded sessions ------------------------------------------------------

/// session.json plus depth_NNN.pgm / us_NNN.pgm per frame, annotations.csv,
/// and the scene meshes. Truth poses go to truth_poses.csv when given.
void write_session(const std::filesystem::path& dir, const SessionSetup& setup,
                   const FrameProvider& frames, const SessionTruth* truth = nullptr);
SessionSetup read_session_setup(const std::filesystem::path& dir);
/// Loads frames lazily from `dir`.
FrameProvider session_frames(const std::filesystem::path& dir, const SessionSetup& setup);
std::filesystem::path session_depth_path(const std::filesystem::path& dir, int k);
std::filesystem::path session_us_path(const std::filesystem::path& dir, int k);

}  // namespace uscal
