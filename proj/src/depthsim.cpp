#include "uscal/depthsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr double kNearPlane = 1e-6;

struct CamTriangle {
  Vec3 a, e1, e2;
};

// Moller-Trumbore with the ray origin at the camera center. Returns the ray
// parameter, which equals z-depth because the direction has unit z.
std::optional<double> intersect(const CamTriangle& tri, const Vec3& dir) {
  const Vec3 pvec = dir.cross(tri.e2);
  const double det = tri.e1.dot(pvec);
  if (std::abs(det) < 1e-14) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = -tri.a;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(tri.e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = tri.e2.dot(qvec) * inv_det;
  if (t <= kNearPlane) return std::nullopt;
  return t;
}

}  // namespace

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

void DepthNoiseModel::validate() const {
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0) || !(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "depth noise parameters must be non-negative");
  }
}

DepthMap render_depth(const TriangleMesh& mesh, const RigidTransform& t_cam_from_world,
                      const CameraIntrinsics& k, const DepthNoiseModel& noise,
                      std::uint64_t seed) {
  if (mesh.empty()) throw Error(ErrorKind::EmptyMesh, "cannot render an empty mesh");
  k.validate();
  noise.validate();

  const int w = k.width;
  const int h = k.height;
  std::vector<double> zbuf(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());

  for (const auto& t : mesh.triangles) {
    const Vec3 a = t_cam_from_world.apply(mesh.vertices[t[0]]);
    const Vec3 b = t_cam_from_world.apply(mesh.vertices[t[1]]);
    const Vec3 c = t_cam_from_world.apply(mesh.vertices[t[2]]);
    if (a.z() <= kNearPlane && b.z() <= kNearPlane && c.z() <= kNearPlane) continue;
    const CamTriangle tri{a, b - a, c - a};

    // Pixel window: projected bounding box when fully in front, else the frame.
    int u0 = 0, u1 = w - 1, v0 = 0, v1 = h - 1;
    if (a.z() > kNearPlane && b.z() > kNearPlane && c.z() > kNearPlane) {
      const Vec2 pa = project(k, a), pb = project(k, b), pc = project(k, c);
      const double umin = std::min({pa.x(), pb.x(), pc.x()});
      const double umax = std::max({pa.x(), pb.x(), pc.x()});
      const double vmin = std::min({pa.y(), pb.y(), pc.y()});
      const double vmax = std::max({pa.y(), pb.y(), pc.y()});
      if (umax < 0.0 || vmax < 0.0 || umin > w - 1 || vmin > h - 1) continue;
      u0 = std::max(0, static_cast<int>(std::floor(umin)));
      u1 = std::min(w - 1, static_cast<int>(std::ceil(umax)));
      v0 = std::max(0, static_cast<int>(std::floor(vmin)));
      v1 = std::min(h - 1, static_cast<int>(std::ceil(vmax)));
    }
    for (int v = v0; v <= v1; ++v) {
      const double dy = (v - k.cy) / k.fy;
      for (int u = u0; u <= u1; ++u) {
        const Vec3 dir((u - k.cx) / k.fx, dy, 1.0);
        if (const auto z = intersect(tri, dir)) {
          double& slot = zbuf[static_cast<std::size_t>(v) * w + u];
          if (*z < slot) slot = *z;
        }
      }
    }
  }

  DepthMap out(k);
  const bool noisy = noise.sigma0 > 0.0 || noise.sigma1 > 0.0 || noise.dropout_rate > 0.0;
  for (int v = 0; v < h; ++v) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(v)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int u = 0; u < w; ++u) {
      const double z = zbuf[static_cast<std::size_t>(v) * w + u];
      if (!std::isfinite(z)) continue;
      double d = z;
      if (noisy) {
        const double n = gauss(rng);
        const double drop = unif(rng);
        if (drop < noise.dropout_rate) continue;
        d = z + noise.sigma_at(z) * n;
        if (d <= 0.0) continue;
      }
      out.at(u, v) = d;
    }
  }
  return out;
}

PointCloud to_point_cloud(const DepthMap& depth) {
  PointCloud cloud;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(u, v);
      if (d > 0.0) cloud.points.push_back(unproject(depth.intrinsics, Vec2(u, v), d));
    }
  }
  return cloud;
}

PointCloud crop_roi(const PointCloud& cloud, const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "ROI radius must be positive");
  PointCloud out;
  out.frame = cloud.frame;
  const double r2 = radius * radius;
  for (const auto& p : cloud.points) {
    if ((p - center).squaredNorm() <= r2) out.points.push_back(p);
  }
  return out;
}

PointCloud transformed(const PointCloud& cloud, const RigidTransform& t_out_from_in,
                       std::string frame) {
  PointCloud out;
  out.frame = std::move(frame);
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t_out_from_in.apply(p));
  return out;
}

std::optional<double> sample_depth(const DepthMap& depth, const Vec2& pixel) {
  const double fu = std::floor(pixel.x());
  const double fv = std::floor(pixel.y());
  const int u = static_cast<int>(fu);
  const int v = static_cast<int>(fv);
  if (u < 0 || v < 0 || u + 1 >= depth.width() || v + 1 >= depth.height()) {
    // Integer pixels on the last row/column are still addressable directly.
    if (pixel.x() == fu && pixel.y() == fv && u >= 0 && v >= 0 && u < depth.width() &&
        v < depth.height() && depth.at(u, v) > 0.0) {
      return depth.at(u, v);
    }
    return std::nullopt;
  }
  const double du = pixel.x() - fu;
  const double dv = pixel.y() - fv;
  const double z00 = depth.at(u, v), z10 = depth.at(u + 1, v);
  const double z01 = depth.at(u, v + 1), z11 = depth.at(u + 1, v + 1);
  if (z00 <= 0.0 || z10 <= 0.0 || z01 <= 0.0 || z11 <= 0.0) return std::nullopt;
  const double inv = (1 - du) * (1 - dv) / z00 + du * (1 - dv) / z10 + (1 - du) * dv / z01 +
                     du * dv / z11;
  return 1.0 / inv;
}

}  // namespace uscal
