#pragma once

// Accuracy evaluation on a cube standing on a marker board: board-based
// ground truth, edge points localized through the calibration chain, and an
// ICP fit of the true edges to those points.

#include <array>
#include <cstdint>
#include <vector>

#include "uscal/calib.hpp"
#include "uscal/depthsim.hpp"
#include "uscal/geom.hpp"
#include "uscal/register.hpp"
#include "uscal/scene.hpp"
#include "uscal/ussim.hpp"

namespace uscal {

/// World CS: origin at the board center, board plane z = 0, z toward the camera.
struct BoardModel {
  std::vector<Vec3> corners;
  RigidTransform cube_pose_in_world;  // T_world_from_cube

  void validate() const;
};

struct BoardParams {
  double size = 300.0;           // square board side
  double square_size = 40.0;     // printed marker squares
  double square_offset = 100.0;  // square centers at (+-offset, +-offset)
  double cube_size = 50.0;
  double cube_yaw_deg = 15.0;    // cube rotation about the board normal
};

/// Four squares give 16 corners; the cube stands centered on the board.
BoardModel make_board(const BoardParams& params);
/// Thin slab whose top face is the board plane.
TriangleMesh make_board_mesh(const BoardParams& params);

struct CornerDetection {
  int corner_id = 0;
  Vec2 pixel = Vec2::Zero();
};

/// Projected corners with Gaussian pixel noise; corners behind the camera or
/// outside the image are not detected.
std::vector<CornerDetection> simulate_detections(const BoardModel& board, const RigidTransform& t_cam_from_world,
                                                 const CameraIntrinsics& k, double pixel_sigma,
                                                 std::uint64_t seed);

/// Unprojects each detection with the depth map and fits world -> camera.
/// Detections without a depth reading are skipped. Throws TooFewDetections
/// below three usable corners.
RigidTransform board_pose_from_detections(const BoardModel& board,
                                          const std::vector<CornerDetection>& detections,
                                          const DepthMap& depth);

struct EdgeFrame {
  std::vector<Vec2> pixels;
  RigidTransform t_cam_from_marker;
};

/// Pixels -> marker CS through the calibration -> camera CS.
PointCloud collect_edge_points(const std::vector<EdgeFrame>& frames, const CalibrationMatrix& matrix);

struct CubeEvalReport {
  double icp_residue = 0.0;   // mean point-to-edge distance after ICP, mm
  double center_offset = 0.0;  // mm
  std::array<double, 3> euler_offsets{0.0, 0.0, 0.0};  // degrees, about x, y, z
  int n_points = 0;
  bool gimbal_lock = false;
};

/// Ground-truth edges sampled every `sample_step` mm in the camera CS are
/// aligned onto the localized points by ICP from identity; the same motion
/// applied to the true cube gives the fitted cube, compared center to center.
CubeEvalReport evaluate_cube(const PointCloud& points, const CubeEdgeModel& model,
                             const RigidTransform& t_cam_from_world_gt,
                             const RigidTransform& cube_pose_in_world, const IcpParams& params,
                             double sample_step = 0.5);

/// One simulated cube evaluation: camera above the board, probe sweeps
/// across each selected edge while the marker is tracked.
struct CubeScenario {
  BoardParams board;
  std::vector<int> edge_ids = default_cube_edge_selection();
  MarkerParams marker;
  CameraIntrinsics camera;
  DepthNoiseModel depth_noise;
  double camera_distance_mm = 500.0;
  double camera_elevation_deg = 60.0;
  double camera_azimuth_deg = 200.0;  // seen from the board's -x, -y quadrant
  double detection_sigma_px = 0.5;
  ImageGeometry image;
  double psf_sigma_px = 3.0;
  SpeckleParams speckle;
  RigidTransform t_marker_from_image;  // true calibration
  int planes_per_edge = 25;
  double sweep_tilt_deg = 10.0;  // plane tilt amplitude along a sweep
  double operator_hint_error_deg = 5.0;
  IcpParams icp;
  SegmentationParams segmentation;
  SpotSource spot_source = SpotSource::Segmented;

  CubeScenario();
  [[nodiscard]] static CubeScenario noiseless();
};

struct CubeEvalRun {
  CubeEvalReport report;
  RigidTransform t_cam_from_world_true;
  RigidTransform t_cam_from_world_board;  // from the detected corners
  int n_frames = 0;
  int n_frames_lost = 0;
};

/// T_cube_from_image for plane `i` of `n` across one edge.
RigidTransform edge_sweep_pose(const CubeEdgeModel& model, std::size_t edge, int i, int n,
                               double tilt_deg, const ImageGeometry& image);

CubeEvalRun simulate_cube_evaluation(const CubeScenario& scenario, const CalibrationMatrix& calibration,
                                     std::uint64_t seed);

}  // namespace uscal
