#pragma once

// Calibration sessions: a simulated acquisition (camera above an N-wire
// phantom, tracked probe sweeping the wires) and the processing chain that
// turns depth maps and ultrasound frames into a calibration.

#include <cstdint>
#include <functional>
#include <vector>

#include "uscal/calib.hpp"
#include "uscal/depthsim.hpp"
#include "uscal/geom.hpp"
#include "uscal/register.hpp"
#include "uscal/scene.hpp"
#include "uscal/ussim.hpp"

namespace uscal {

/// Mixes a base seed with a stream id and an index into an independent seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

/// `r` turned by `angle_deg` about a random axis: a simulated operator's
/// rough orientation guess.
Mat3 perturbed_rotation(const Mat3& r, double angle_deg, std::uint64_t seed);

/// One probe pose of the sweep, as Euler angles about the image axes (applied
/// around the top-center of the image) on top of the perpendicular slice at
/// `x0` along the wires.
struct ProbePose {
  double x0 = 20.0;          // mm along the wires
  double about_u_deg = 0.0;  // tilts the plane along the wires
  double about_v_deg = 0.0;  // fans the plane about the depth axis
  double about_n_deg = 0.0;  // in-plane rotation
};

struct TrajectorySpec {
  std::vector<ProbePose> poses;
  double jitter_mm = 0.0;
  double jitter_deg = 0.0;
};

/// 20 poses fanning -20..+20 degrees with x0 running 10..30 mm.
TrajectorySpec default_trajectory(int n = 20);

/// T_phantom_from_image for one probe pose.
RigidTransform probe_plane_pose(const ProbePose& pose, const ImageGeometry& image,
                                const NWireParams& phantom);

/// T_marker_from_image used by the simulator as the true calibration.
RigidTransform default_true_calibration(const MarkerParams& marker);

struct CalibrationScenario {
  NWireParams phantom;
  MarkerParams marker;
  CameraIntrinsics camera;
  DepthNoiseModel depth_noise;
  double camera_distance_mm = 500.0;
  double camera_elevation_deg = 55.0;  // above the phantom's top plane
  double camera_azimuth_deg = 30.0;    // away from the -x side, toward -y
  ImageGeometry image;
  double psf_sigma_px = 3.0;
  SpeckleParams speckle;
  RigidTransform t_marker_from_image;
  TrajectorySpec trajectory = default_trajectory();
  int heldout_every = 4;                     // every n-th frame is held out; 0 = none
  double operator_hint_error_deg = 5.0;      // orientation error of the operator's initial guess
  IcpParams icp;
  SegmentationParams segmentation;
  MatchParams match;

  CalibrationScenario() : t_marker_from_image(default_true_calibration(marker)) {}
  [[nodiscard]] static CalibrationScenario noiseless();
};

/// Everything the processing chain needs besides the frames: scene models,
/// camera, the operator's ROIs and rough orientations.
struct SessionSetup {
  NWireParams phantom;
  MarkerParams marker;
  CameraIntrinsics camera;
  ImageGeometry image;
  Vec3 phantom_roi_center = Vec3::Zero();
  double phantom_roi_radius = 0.0;
  Mat3 phantom_rotation_hint = Mat3::Identity();
  Vec3 marker_roi_center = Vec3::Zero();
  double marker_roi_radius = 0.0;
  Mat3 marker_rotation_hint = Mat3::Identity();
  int n_frames = 0;
  std::vector<bool> heldout;
};

struct SessionFrame {
  int index = 0;
  DepthMap depth;
  USFrame us;
};

struct SessionTruth {
  RigidTransform t_cam_from_phantom;
  std::vector<RigidTransform> t_cam_from_marker;
  CalibrationMatrix calibration;
};

/// Static part of a simulated session: world is the phantom CS.
class SimulatedSession {
 public:
  SimulatedSession(const CalibrationScenario& scenario, std::uint64_t seed);

  [[nodiscard]] const SessionSetup& setup() const { return setup_; }
  [[nodiscard]] const SessionTruth& truth() const { return truth_; }
  [[nodiscard]] SessionFrame frame(int k) const;

 private:
  CalibrationScenario scenario_;
  std::uint64_t seed_;
  SessionSetup setup_;
  SessionTruth truth_;
  NWireGeometry wires_;
  TriangleMesh phantom_world_;
  TriangleMesh marker_mesh_;
  RigidTransform t_cam_from_world_;
  std::vector<RigidTransform> t_phantom_from_image_;
};

struct ProcessingParams {
  IcpParams icp;
  SegmentationParams segmentation;
  MatchParams match;
};

struct TrackedPose {
  int frame = 0;
  RigidTransform t_cam_from_marker;
  double rms_mm = 0.0;
  bool lost = false;
};

struct CalibrationOutcome {
  CalibrationReport report;
  RigidTransform t_cam_from_phantom;
  std::vector<TrackedPose> poses;
  int n_frames_dropped = 0;
  int n_heldout = 0;
  bool phantom_ambiguous = false;
  bool marker_ambiguous = false;
};

using FrameProvider = std::function<SessionFrame(int)>;

/// Localize and freeze the phantom on frame 0, localize the marker and track
/// it through every frame, segment and match each ultrasound frame, solve on
/// the calibration frames and score the held-out ones. Frames whose tracking
/// is lost or whose spots fail to match are dropped.
CalibrationOutcome process_session(const SessionSetup& setup, const FrameProvider& frames,
                                   const ProcessingParams& params);

/// Marker localization on frame 0, then one tracking step per frame.
std::vector<TrackedPose> track_marker(const SessionSetup& setup, const FrameProvider& frames,
                                      const IcpParams& icp);

struct CalibrationAccuracy {
  double translation_mm = 0.0;
  double rotation_deg = 0.0;
  double scale_rel = 0.0;  // max of |sx/sx_true - 1| and |sy/sy_true - 1|
};

CalibrationAccuracy compare_calibration(const CalibrationMatrix& truth, const CalibrationMatrix& estimate);

}  // namespace uscal
