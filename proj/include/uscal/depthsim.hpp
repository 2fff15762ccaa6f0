#pragma once

// Synthetic RGB-D depth sensor: nearest-hit ray casting of triangle meshes
// with a distance-dependent Gaussian noise model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uscal/geom.hpp"
#include "uscal/scene.hpp"

namespace uscal {

/// Z-depth (along the optical axis) per pixel, row-major; 0 means no return.
struct DepthMap {
  CameraIntrinsics intrinsics;
  std::vector<double> depths;

  DepthMap() = default;
  explicit DepthMap(const CameraIntrinsics& k)
      : intrinsics(k), depths(static_cast<std::size_t>(k.width) * k.height, 0.0) {}

  [[nodiscard]] int width() const { return intrinsics.width; }
  [[nodiscard]] int height() const { return intrinsics.height; }
  [[nodiscard]] double at(int u, int v) const {
    return depths[static_cast<std::size_t>(v) * intrinsics.width + u];
  }
  double& at(int u, int v) { return depths[static_cast<std::size_t>(v) * intrinsics.width + u]; }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::string frame = "camera";

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  [[nodiscard]] Vec3 centroid() const;
};

/// sigma(z) = sigma0 + sigma1 * (z / 1000)^2, z in mm.
struct DepthNoiseModel {
  double sigma0 = 0.5;
  double sigma1 = 2.5;
  double dropout_rate = 0.01;

  static DepthNoiseModel none() { return {0.0, 0.0, 0.0}; }
  [[nodiscard]] double sigma_at(double z) const { return sigma0 + sigma1 * (z / 1000.0) * (z / 1000.0); }
  void validate() const;
};

/// Ray-casts `mesh` (expressed in world coordinates). Noise is drawn from one
/// RNG stream per image row seeded from (seed, row), so the result does not
/// depend on how rows are scheduled. Throws EmptyMesh.
DepthMap render_depth(const TriangleMesh& mesh, const RigidTransform& t_cam_from_world,
                      const CameraIntrinsics& k, const DepthNoiseModel& noise, std::uint64_t seed);

/// One camera-frame point per nonzero pixel.
PointCloud to_point_cloud(const DepthMap& depth);

/// Points with ||p - center|| <= radius, order preserved.
PointCloud crop_roi(const PointCloud& cloud, const Vec3& center, double radius);

PointCloud transformed(const PointCloud& cloud, const RigidTransform& t_out_from_in,
                       std::string frame);

/// Depth at a subpixel location: bilinear interpolation of inverse depth over
/// the four neighboring pixels (exact on planar surfaces). Empty when any
/// neighbor has no return or the location is outside the map.
std::optional<double> sample_depth(const DepthMap& depth, const Vec2& pixel);

}  // namespace uscal
