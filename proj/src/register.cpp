#include "uscal/register.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr double kRankTolerance = 1e-12;

struct Pairing {
  std::vector<Vec3> model;
  std::vector<Vec3> scene;
  double objective_rms = 0.0;  // truncated: rejected points count as max distance
  double inlier_rms = 0.0;
  double inlier_mean = 0.0;
};

struct Visibility {
  std::vector<std::uint8_t> samples;
  std::vector<std::uint8_t> triangles;
};

// Model parts facing the scene origin (the camera center for camera clouds).
std::optional<Visibility> facing(const IcpModel& model, const RigidTransform& t_scene_from_model,
                                 const IcpParams& params) {
  if (!params.cull_back_faces || !model.has_surface()) return std::nullopt;
  const Vec3 eye = invert(t_scene_from_model).translation;
  Visibility v;
  v.triangles.resize(model.mesh.triangles.size());
  for (std::size_t t = 0; t < model.mesh.triangles.size(); ++t) {
    const Vec3& a = model.mesh.vertices[static_cast<std::size_t>(model.mesh.triangles[t][0])];
    v.triangles[t] = model.triangle_normal[t].dot(eye - a) > 0.0;
  }
  v.samples.resize(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    v.samples[i] = v.triangles[static_cast<std::size_t>(model.sample_triangle[i])];
  }
  return v;
}

Pairing pair_up(const IcpModel& model, const PointCloud& scene, const RigidTransform& t_scene_from_model,
                const IcpParams& params) {
  const double max_dist = params.max_correspondence_distance;
  const auto vis = facing(model, t_scene_from_model, params);
  const std::vector<std::uint8_t>* mask = vis ? &vis->samples : nullptr;
  Pairing p;
  p.model.reserve(scene.size());
  p.scene.reserve(scene.size());
  const RigidTransform to_model = invert(t_scene_from_model);
  const double cap2 = max_dist * max_dist;
  double truncated = 0.0, sum2 = 0.0, sum = 0.0;
  for (const auto& s : scene.points) {
    if (const auto hit = model.tree.nearest(to_model.apply(s), max_dist, mask)) {
      p.model.push_back(model.points.points[hit->index]);
      p.scene.push_back(s);
      truncated += hit->dist2;
      sum2 += hit->dist2;
      sum += std::sqrt(hit->dist2);
    } else {
      truncated += cap2;
    }
  }
  const auto n = static_cast<double>(p.model.size());
  p.objective_rms = std::sqrt(truncated / static_cast<double>(scene.size()));
  if (n > 0) {
    p.inlier_rms = std::sqrt(sum2 / n);
    p.inlier_mean = sum / n;
  }
  return p;
}

struct SurfacePairing {
  std::vector<Vec3> scene;
  std::vector<Vec3> closest;  // closest surface point, model frame
  double objective_rms = 0.0;
  double inlier_rms = 0.0;
  double inlier_mean = 0.0;
};

SurfacePairing pair_with_surface(const IcpModel& model, const PointCloud& scene,
                                 const RigidTransform& t_scene_from_model, const IcpParams& params) {
  const double max_dist = params.max_correspondence_distance;
  const auto vis = facing(model, t_scene_from_model, params);
  const std::vector<std::uint8_t>* mask = vis ? &vis->samples : nullptr;
  SurfacePairing p;
  const RigidTransform to_model = invert(t_scene_from_model);
  const double cap2 = max_dist * max_dist;
  double truncated = 0.0, sum2 = 0.0, sum = 0.0;
  for (const auto& s : scene.points) {
    const Vec3 m = to_model.apply(s);
    const auto hit = model.tree.nearest(m, max_dist, mask);
    if (!hit) {
      truncated += cap2;
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    Vec3 q = Vec3::Zero();
    for (int t : model.sample_candidates[hit->index]) {
      if (vis && !vis->triangles[static_cast<std::size_t>(t)]) continue;
      const auto& f = model.mesh.triangles[static_cast<std::size_t>(t)];
      const Vec3 c = closest_point_on_triangle(m, model.mesh.vertices[f[0]], model.mesh.vertices[f[1]],
                                               model.mesh.vertices[f[2]]);
      const double d2 = (c - m).squaredNorm();
      if (d2 < best) {
        best = d2;
        q = c;
      }
    }
    p.scene.push_back(s);
    p.closest.push_back(q);
    truncated += best;
    sum2 += best;
    sum += std::sqrt(best);
  }
  const auto n = static_cast<double>(p.closest.size());
  p.objective_rms = std::sqrt(truncated / static_cast<double>(scene.size()));
  if (n > 0) {
    p.inlier_rms = std::sqrt(sum2 / n);
    p.inlier_mean = sum / n;
  }
  return p;
}

struct VoxelKey {
  long long x, y, z;
  auto operator<=>(const VoxelKey&) const = default;
};

}  // namespace

void IcpParams::validate() const {
  if (max_iterations <= 0 || !(convergence_delta_rms > 0.0) ||
      !(max_correspondence_distance > 0.0) || !(model_downsample_spacing > 0.0) ||
      surface_iterations < 0 || !(surface_convergence_delta > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "ICP parameters must be positive");
  }
}

RigidTransform umeyama_fit(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorKind::InvalidArgument, "umeyama_fit needs paired point sets");
  }
  if (src.size() < 3) {
    throw Error(ErrorKind::DegenerateConfiguration, "umeyama_fit needs at least 3 pairs");
  }
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Mat3 cov = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_s;
    cov += (dst[i] - mu_d) * a.transpose();
    spread += a * a.transpose();
  }
  Eigen::JacobiSVD<Mat3> spread_svd(spread);
  const auto sv = spread_svd.singularValues();
  if (sv(0) <= 0.0 || sv(1) <= kRankTolerance * sv(0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "source points are coincident or collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto cs = svd.singularValues();
  if (cs(0) <= 0.0 || cs(1) <= kRankTolerance * cs(0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "cross-covariance has rank < 2");
  }
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return {r, mu_d - r * mu_s};
}

SurfaceSamples sample_mesh_surface_indexed(const TriangleMesh& mesh, double spacing,
                                           std::uint64_t seed) {
  if (mesh.empty()) throw Error(ErrorKind::EmptyMesh, "cannot sample an empty mesh");
  if (!(spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "sampling spacing must be > 0");

  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    total += mesh.area(i);
    cumulative.push_back(total);
  }
  const auto n_samples =
      static_cast<std::size_t>(std::ceil(10.0 * total / (spacing * spacing))) + 100;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::map<VoxelKey, std::pair<Vec3, int>> voxels;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double pick = unif(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const int tri = static_cast<int>(it - cumulative.begin());
    const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
    const double r1 = std::sqrt(unif(rng));
    const double r2 = unif(rng);
    const Vec3 p = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                   r1 * r2 * mesh.vertices[t[2]];

    const VoxelKey key{static_cast<long long>(std::floor(p.x() / spacing)),
                       static_cast<long long>(std::floor(p.y() / spacing)),
                       static_cast<long long>(std::floor(p.z() / spacing))};
    const Vec3 center = (Vec3(key.x, key.y, key.z) + Vec3::Constant(0.5)) * spacing;
    auto [slot, inserted] = voxels.try_emplace(key, p, tri);
    if (!inserted && (p - center).squaredNorm() < (slot->second.first - center).squaredNorm()) {
      slot->second = {p, tri};
    }
  }

  SurfaceSamples out;
  out.cloud.frame = "model";
  out.cloud.points.reserve(voxels.size());
  out.triangle.reserve(voxels.size());
  for (const auto& [key, sample] : voxels) {
    out.cloud.points.push_back(sample.first);
    out.triangle.push_back(sample.second);
  }
  return out;
}

PointCloud sample_mesh_surface(const TriangleMesh& mesh, double spacing, std::uint64_t seed) {
  return sample_mesh_surface_indexed(mesh, spacing, seed).cloud;
}

IcpModel::IcpModel(PointCloud model_points)
    : points(std::move(model_points)), tree(points.points), centroid(points.centroid()) {
  for (const auto& p : points.points) radius = std::max(radius, (p - centroid).norm());
}

IcpModel::IcpModel(const TriangleMesh& surface, double spacing) : IcpModel(PointCloud{}) {
  SurfaceSamples samples = sample_mesh_surface_indexed(surface, spacing);
  points = std::move(samples.cloud);
  tree = KdTree(points.points);
  centroid = points.centroid();
  radius = 0.0;
  for (const auto& p : points.points) radius = std::max(radius, (p - centroid).norm());
  mesh = surface;
  sample_triangle = std::move(samples.triangle);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) triangle_normal.push_back(mesh.normal(t));

  // Triangles that can hold the closest surface point of any query whose
  // nearest sample is this one and lies within one spacing of it.
  sample_candidates.resize(points.size());
  const double reach2 = 4.0 * spacing * spacing;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points.points[i];
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& f = mesh.triangles[t];
      const Vec3 c = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
      if ((c - p).squaredNorm() <= reach2 || static_cast<int>(t) == sample_triangle[i]) {
        sample_candidates[i].push_back(static_cast<int>(t));
      }
    }
  }
}

RegistrationResult icp(const IcpModel& model, const PointCloud& scene, const RigidTransform& init,
                       const IcpParams& params) {
  params.validate();
  if (model.points.empty() || scene.empty()) {
    throw Error(ErrorKind::InvalidArgument, "icp needs non-empty model and scene clouds");
  }

  RegistrationResult result;
  result.pose = init;
  Pairing current = pair_up(model, scene, init, params);
  if (current.model.empty()) {
    throw Error(ErrorKind::NoCorrespondences,
                "no scene point within max_correspondence_distance of the model at init");
  }
  result.rms_history.push_back(current.objective_rms);

  for (int it = 0; it < params.max_iterations; ++it) {
    RigidTransform candidate;
    try {
      candidate = umeyama_fit(current.model, current.scene);
    } catch (const Error&) {
      break;  // too few or collinear inliers; keep the last pose
    }
    ++result.iterations;
    Pairing next = pair_up(model, scene, candidate, params);
    if (next.model.empty() || next.objective_rms > current.objective_rms) {
      // Re-pairing can only raise the truncated objective through
      // floating-point noise or a change of the visible model part.
      result.converged = true;
      break;
    }
    const double delta = current.objective_rms - next.objective_rms;
    result.pose = candidate;
    current = std::move(next);
    result.rms_history.push_back(current.objective_rms);
    if (delta < params.convergence_delta_rms) {
      result.converged = true;
      break;
    }
  }

  result.rms_residue = current.inlier_rms;
  result.mean_residue = current.inlier_mean;
  result.inliers = current.model.size();
  if (!model.has_surface() || params.surface_iterations == 0) return result;

  SurfacePairing surf = pair_with_surface(model, scene, result.pose, params);
  if (surf.closest.empty()) return result;
  result.rms_history.push_back(surf.objective_rms);
  for (int it = 0; it < params.surface_iterations; ++it) {
    RigidTransform candidate;
    try {
      candidate = umeyama_fit(surf.closest, surf.scene);
    } catch (const Error&) {
      break;
    }
    SurfacePairing next = pair_with_surface(model, scene, candidate, params);
    if (next.closest.empty() || next.objective_rms > surf.objective_rms) break;
    const double delta = surf.objective_rms - next.objective_rms;
    result.pose = candidate;
    surf = std::move(next);
    result.rms_history.push_back(surf.objective_rms);
    if (delta < params.surface_convergence_delta) break;
  }
  result.rms_residue = surf.inlier_rms;
  result.mean_residue = surf.inlier_mean;
  result.inliers = surf.closest.size();
  return result;
}

RegistrationResult icp(const PointCloud& model_points, const PointCloud& scene,
                       const RigidTransform& init, const IcpParams& params) {
  return icp(IcpModel(model_points), scene, init, params);
}

RegistrationResult localize_model(const TriangleMesh& mesh, const PointCloud& scene,
                                  const Vec3& roi_center, double roi_radius,
                                  const IcpParams& params, const LocalizeOptions& options) {
  params.validate();
  const PointCloud roi = crop_roi(scene, roi_center, roi_radius);
  if (roi.empty()) throw Error(ErrorKind::EmptyRoi, "no scene points inside the ROI");

  const IcpModel model(mesh, params.model_downsample_spacing);
  const Vec3 roi_centroid = roi.centroid();
  // The camera only sees the model faces turned toward it, so the ROI
  // centroid is matched with the centroid of those samples.
  auto start_from = [&](const Mat3& r) {
    Vec3 t = roi_centroid - r * model.centroid;
    for (int pass = 0; pass < 2; ++pass) {
      Vec3 sum = Vec3::Zero();
      int count = 0;
      for (std::size_t i = 0; i < model.points.size(); ++i) {
        const Vec3 p = r * model.points.points[i] + t;
        const Vec3 n = r * model.triangle_normal[static_cast<std::size_t>(model.sample_triangle[i])];
        if (n.dot(p) < 0.0) {
          sum += model.points.points[i];
          ++count;
        }
      }
      if (count == 0) break;
      t = roi_centroid - r * (sum / count);
    }
    return RigidTransform{r, t};
  };

  RegistrationResult best = icp(model, roi, start_from(options.rotation_hint), params);
  if (!best.converged) spdlog::warn("localize_model: ICP did not converge");

  if (options.check_ambiguity) {
    const Mat3& h = options.rotation_hint;
    const std::array<Mat3, 5> flips{h * rot_x(kPi), h * rot_y(kPi), h * rot_z(kPi),
                                    h * rot_z(kPi / 2), h * rot_z(-kPi / 2)};
    const double reference = best.rms_history.back();
    for (const auto& r : flips) {
      RegistrationResult alt;
      try {
        alt = icp(model, roi, start_from(r), params);
      } catch (const Error&) {
        continue;
      }
      const double angle = rotation_angle(best.pose.rotation.transpose() * alt.pose.rotation);
      if (alt.rms_history.back() <= 1.1 * reference + 0.05 && angle > deg2rad(5.0)) {
        best.ambiguous = true;
        spdlog::warn(
            "localize_model: an orientation {:.1f} deg away fits about as well "
            "(residue {:.3f} vs {:.3f} mm); the model may be symmetric",
            rad2deg(angle), alt.rms_history.back(), reference);
        break;
      }
    }
  }
  return best;
}

TrackerState start_tracker(const TriangleMesh& mesh, const RegistrationResult& initial,
                           const IcpParams& params, bool frozen) {
  params.validate();
  TrackerState state;
  state.model = std::make_shared<const IcpModel>(mesh, params.model_downsample_spacing);
  state.last_pose = initial.pose;
  state.frozen = frozen;
  state.residue_history.push_back(initial.rms_residue);
  return state;
}

std::pair<TrackerState, RegistrationResult> track_step(TrackerState state, const PointCloud& scene,
                                                       const IcpParams& params) {
  RegistrationResult result;
  result.pose = state.last_pose;
  result.converged = true;
  if (state.frozen) {
    result.rms_residue = state.residue_history.empty() ? 0.0 : state.residue_history.back();
    return {std::move(state), result};
  }

  const Vec3 center = state.last_pose.apply(state.model->centroid);
  const PointCloud roi =
      scene.empty() ? scene
                    : crop_roi(scene, center, state.model->radius + params.max_correspondence_distance);
  if (roi.empty()) {
    state.lost = true;
    result.converged = false;
    return {std::move(state), result};
  }

  try {
    result = icp(*state.model, roi, state.last_pose, params);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoCorrespondences) throw;
    state.lost = true;
    result.converged = false;
    return {std::move(state), result};
  }

  state.residue_history.push_back(result.rms_residue);
  state.lost = result.rms_residue > 3.0 * params.model_downsample_spacing;
  if (!state.lost) state.last_pose = result.pose;
  return {std::move(state), result};
}

}  // namespace uscal
