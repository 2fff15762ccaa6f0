#pragma once

// Model-to-cloud registration: Umeyama rigid fit, point-to-point ICP,
// ROI-initialized model localization and warm-started tracking.

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "uscal/depthsim.hpp"
#include "uscal/geom.hpp"
#include "uscal/kdtree.hpp"
#include "uscal/scene.hpp"

namespace uscal {

struct IcpParams {
  int max_iterations = 100;
  double convergence_delta_rms = 1e-4;       // mm
  double max_correspondence_distance = 15.0;  // mm
  double model_downsample_spacing = 3.0;      // mm
  /// Iterations pairing scene points with their closest points on the exact
  /// mesh surface, run after the sampled-model stage; 0 disables them.
  int surface_iterations = 100;
  double surface_convergence_delta = 1e-7;  // mm
  /// Mesh models only: pair scene points with model parts facing the scene
  /// origin, i.e. the camera center for camera-frame clouds.
  bool cull_back_faces = true;

  void validate() const;
};

struct RegistrationResult {
  RigidTransform pose;  // T_scene_from_model (T_cam_from_model for camera clouds)
  double rms_residue = 0.0;
  double mean_residue = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t inliers = 0;
  std::vector<double> rms_history;  // one entry per accepted iterate
  bool ambiguous = false;
};

/// Least-squares rigid T minimizing sum ||T src_i - dst_i||^2, det R = +1.
/// Throws DegenerateConfiguration for fewer than 3 pairs or collinear sets.
RigidTransform umeyama_fit(std::span<const Vec3> src, std::span<const Vec3> dst);

struct SurfaceSamples {
  PointCloud cloud;
  std::vector<int> triangle;  // source triangle of each sample
};

/// Uniform-area random samples (fixed seed) thinned to one point per voxel of
/// edge `spacing`, keeping the sample closest to each voxel center.
SurfaceSamples sample_mesh_surface_indexed(const TriangleMesh& mesh, double spacing,
                                           std::uint64_t seed = 0x5eedULL);
PointCloud sample_mesh_surface(const TriangleMesh& mesh, double spacing,
                               std::uint64_t seed = 0x5eedULL);

/// Model points with their search index. Built from a mesh, it also keeps the
/// triangles for the surface refinement.
struct IcpModel {
  PointCloud points;
  KdTree tree;
  Vec3 centroid = Vec3::Zero();
  double radius = 0.0;  // max distance from the centroid
  TriangleMesh mesh;
  std::vector<int> sample_triangle;
  std::vector<Vec3> triangle_normal;
  std::vector<std::vector<int>> sample_candidates;  // triangles near each sample

  explicit IcpModel(PointCloud model_points);
  IcpModel(const TriangleMesh& mesh, double spacing);
  [[nodiscard]] bool has_surface() const { return !mesh.empty(); }
};

/// Point-to-point ICP. Every scene point is paired with its nearest model
/// point (pairs farther than max_correspondence_distance are rejected), the
/// pose is refit with umeyama_fit, and iteration stops once the RMS drops by
/// less than convergence_delta_rms. An iterate that would raise the RMS is
/// discarded, so rms_history is non-increasing. Models with a surface then
/// continue with the closest points on the mesh itself as partners, which
/// removes the sampling bias; surface distances never exceed sample
/// distances, so the history stays monotone. Throws
/// NoCorrespondences when nothing pairs up at the initial pose.
RegistrationResult icp(const IcpModel& model, const PointCloud& scene, const RigidTransform& init,
                       const IcpParams& params);
RegistrationResult icp(const PointCloud& model_points, const PointCloud& scene,
                       const RigidTransform& init, const IcpParams& params);

struct LocalizeOptions {
  /// Initial model orientation in the scene frame (the operator's setup).
  Mat3 rotation_hint = Mat3::Identity();
  /// Re-run from flipped initial orientations and flag near-equal residues.
  bool check_ambiguity = true;
};

/// Crops the scene to the ROI, moves the model centroid onto the ROI centroid
/// and runs ICP. Throws EmptyRoi; a non-converged run is reported through
/// `converged`, not thrown.
RegistrationResult localize_model(const TriangleMesh& mesh, const PointCloud& scene,
                                  const Vec3& roi_center, double roi_radius,
                                  const IcpParams& params, const LocalizeOptions& options = {});

struct TrackerState {
  std::shared_ptr<const IcpModel> model;
  RigidTransform last_pose;  // T_cam_from_model
  bool frozen = false;
  bool lost = false;
  std::vector<double> residue_history;
};

TrackerState start_tracker(const TriangleMesh& mesh, const RegistrationResult& initial,
                           const IcpParams& params, bool frozen = false);

/// One tracking update. A frozen state returns its pose untouched. Otherwise
/// ICP is warm-started from the last pose on the scene cropped around the
/// model; the state goes lost when nothing pairs up or the RMS exceeds three
/// model sampling spacings, and keeps its last good pose.
std::pair<TrackerState, RegistrationResult> track_step(TrackerState state, const PointCloud& scene,
                                                       const IcpParams& params);

}  // namespace uscal
