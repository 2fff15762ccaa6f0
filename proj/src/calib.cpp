#include "uscal/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr double kMaxCondition = 1e8;
constexpr int kRefineIterations = 50;

Mat3 axis_angle_or_identity(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return axis_angle(w / angle, angle);
}

double solve_cost(const CalibrationMatrix& m, std::span<const Correspondence> corrs) {
  double cost = 0.0;
  for (const auto& c : corrs) cost += (m.to_marker(c.pixel) - c.marker_point).squaredNorm();
  return cost;
}

// Levenberg-Marquardt over (sx, sy, rotation, t) with a right-multiplied
// rotation increment R <- R exp([w]x).
CalibrationMatrix refine_shear_free(CalibrationMatrix m, std::span<const Correspondence> corrs) {
  using Mat8 = Eigen::Matrix<double, 8, 8>;
  using Vec8 = Eigen::Matrix<double, 8, 1>;
  double cost = solve_cost(m, corrs);
  double lambda = 1e-6;
  for (int it = 0; it < kRefineIterations && cost > 0.0; ++it) {
    Mat8 jtj = Mat8::Zero();
    Vec8 jtr = Vec8::Zero();
    for (const auto& c : corrs) {
      const double u = c.pixel.x(), v = c.pixel.y();
      const Vec3 w(m.sx * u, m.sy * v, 0.0);
      const Vec3 r = m.rotation * w + m.translation - c.marker_point;
      Eigen::Matrix<double, 3, 8> j;
      j.col(0) = u * m.rotation.col(0);
      j.col(1) = v * m.rotation.col(1);
      j.block<3, 3>(0, 2) = -m.rotation * skew(w);
      j.block<3, 3>(0, 5) = Mat3::Identity();
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Mat8 damped = jtj;
      damped.diagonal() *= (1.0 + lambda);
      const Vec8 step = -damped.ldlt().solve(jtr);
      CalibrationMatrix trial = m;
      trial.sx += step(0);
      trial.sy += step(1);
      trial.rotation = nearest_rotation(m.rotation * axis_angle_or_identity(step.segment<3>(2)));
      trial.translation += step.segment<3>(5);
      trial.a.col(0) = trial.sx * trial.rotation.col(0);
      trial.a.col(1) = trial.sy * trial.rotation.col(1);
      trial.a.col(2) = trial.translation;
      const double trial_cost = solve_cost(trial, corrs);
      if (trial_cost < cost && trial.sx > 0.0 && trial.sy > 0.0) {
        const double gain = cost - trial_cost;
        m = trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        if (gain <= 1e-15 * (1.0 + cost)) return m;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return m;
}

}  // namespace

CalibrationMatrix CalibrationMatrix::from_decomposition(double sx, double sy,
                                                        const RigidTransform& t_marker_from_image) {
  if (!(sx > 0.0) || !(sy > 0.0)) throw Error(ErrorKind::InvalidArgument, "scales must be > 0");
  CalibrationMatrix m;
  m.sx = sx;
  m.sy = sy;
  m.rotation = t_marker_from_image.rotation;
  m.translation = t_marker_from_image.translation;
  m.a.col(0) = sx * m.rotation.col(0);
  m.a.col(1) = sy * m.rotation.col(1);
  m.a.col(2) = m.translation;
  return m;
}

CalibrationMatrix CalibrationMatrix::from_affine(const Mat3& a) {
  const Vec3 c1 = a.col(0);
  const Vec3 c2 = a.col(1);
  const double sx = c1.norm();
  const double sy = c2.norm();
  if (!(sx > 0.0) || !(sy > 0.0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "affine map has a zero column");
  }
  Mat3 m;
  m.col(0) = c1 / sx;
  m.col(1) = c2 / sy;
  m.col(2) = c1.cross(c2) / (sx * sy);
  return from_decomposition(sx, sy, {nearest_rotation(m), a.col(2)});
}

void CalibrationMatrix::validate(double tol) const {
  if (!(sx > 0.0) || !(sy > 0.0)) throw Error(ErrorKind::InvalidArgument, "scales must be > 0");
  if (!RigidTransform(rotation, translation).is_valid(tol)) {
    throw Error(ErrorKind::InvalidArgument, "calibration rotation is not orthonormal");
  }
  Mat3 rebuilt;
  rebuilt.col(0) = sx * rotation.col(0);
  rebuilt.col(1) = sy * rotation.col(1);
  rebuilt.col(2) = translation;
  if ((rebuilt - a).cwiseAbs().maxCoeff() > tol * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::InvalidArgument, "matrix does not match its decomposition");
  }
}

std::vector<Vec2> segment_spots(const USFrame& frame, const SegmentationParams& params) {
  const int w = frame.width;
  const int h = frame.height;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
  std::vector<Vec2> centroids;
  std::vector<int> stack;

  for (int v0 = 0; v0 < h; ++v0) {
    for (int u0 = 0; u0 < w; ++u0) {
      const std::size_t seed_idx = static_cast<std::size_t>(v0) * w + u0;
      if (visited[seed_idx] || frame.pixels[seed_idx] <= params.threshold) continue;

      double sw = 0.0, su = 0.0, sv = 0.0;
      int count = 0;
      visited[seed_idx] = 1;
      stack.assign(1, static_cast<int>(seed_idx));
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int u = idx % w;
        const int v = idx / w;
        const double weight = frame.pixels[static_cast<std::size_t>(idx)] - params.threshold;
        sw += weight;
        su += weight * u;
        sv += weight * v;
        ++count;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int nu = u + du, nv = v + dv;
            if (nu < 0 || nv < 0 || nu >= w || nv >= h) continue;
            const std::size_t n = static_cast<std::size_t>(nv) * w + nu;
            if (visited[n] || frame.pixels[n] <= params.threshold) continue;
            visited[n] = 1;
            stack.push_back(static_cast<int>(n));
          }
        }
      }
      if (count >= params.min_blob_px && count <= params.max_blob_px && sw > 0.0) {
        centroids.emplace_back(su / sw, sv / sw);
      }
    }
  }
  std::sort(centroids.begin(), centroids.end(), [](const Vec2& a, const Vec2& b) {
    return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
  });
  return centroids;
}

std::array<Vec2, 9> LabeledSpots::by_wire() const {
  std::array<Vec2, 9> out;
  for (std::size_t l = 0; l < 3; ++l) {
    out[3 * l + 0] = layers[l].front;
    out[3 * l + 1] = layers[l].middle;
    out[3 * l + 2] = layers[l].back;
  }
  return out;
}

LabeledSpots match_nwires(std::span<const Vec2> spots, const MatchParams& params) {
  if (spots.size() != 9) {
    throw Error(ErrorKind::MatchFailed, "expected 9 spots, got " + std::to_string(spots.size()));
  }
  std::vector<Vec2> sorted(spots.begin(), spots.end());
  std::sort(sorted.begin(), sorted.end(), [](const Vec2& a, const Vec2& b) {
    return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
  });

  LabeledSpots out;
  for (std::size_t l = 0; l < 3; ++l) {
    std::array<Vec2, 3> triple{sorted[3 * l], sorted[3 * l + 1], sorted[3 * l + 2]};
    std::sort(triple.begin(), triple.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x(); });
    if (!params.front_at_low_u) std::swap(triple[0], triple[2]);

    LabeledLayer& layer = out.layers[l];
    layer.front = triple[0];
    layer.middle = triple[1];
    layer.back = triple[2];

    const Vec2 span = layer.back - layer.front;
    const double len = span.norm();
    if (len <= 0.0) throw Error(ErrorKind::MatchFailed, "coincident side-wire spots");
    const Vec2 rel = layer.middle - layer.front;
    const double off_line = std::abs(span.x() * rel.y() - span.y() * rel.x()) / len;
    if (off_line > params.collinearity_tolerance_px) {
      throw Error(ErrorKind::MatchFailed, "layer " + std::to_string(l) + " is not collinear (" +
                                              std::to_string(off_line) + " px off)");
    }
    layer.alpha = rel.norm() / len;
    if (!(layer.alpha >= 0.0 && layer.alpha <= 1.0) || rel.dot(span) < 0.0) {
      throw Error(ErrorKind::MatchFailed, "middle spot is not between the side wires");
    }
  }
  return out;
}

std::array<Correspondence, 3> build_correspondences(const LabeledSpots& labeled,
                                                    const NWireGeometry& geom,
                                                    const RigidTransform& t_cam_from_phantom,
                                                    const RigidTransform& t_cam_from_marker,
                                                    int frame_index) {
  const RigidTransform marker_from_phantom = compose(invert(t_cam_from_marker), t_cam_from_phantom);
  std::array<Correspondence, 3> out;
  for (int l = 0; l < 3; ++l) {
    const auto& layer = labeled.layers[static_cast<std::size_t>(l)];
    const Vec3 x_phantom = middle_point_on_diagonal(geom, l, layer.alpha);
    out[static_cast<std::size_t>(l)] = {layer.middle, marker_from_phantom.apply(x_phantom), frame_index};
  }
  return out;
}

CalibrationMatrix solve_calibration(std::span<const Correspondence> corrs) {
  if (corrs.size() < 4) {
    throw Error(ErrorKind::TooFewCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(corrs.size()));
  }
  const auto n = static_cast<Eigen::Index>(corrs.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::MatrixXd targets(n, 3);
  Vec2 mean_px = Vec2::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = corrs[static_cast<std::size_t>(i)];
    design.row(i) << c.pixel.x(), c.pixel.y(), 1.0;
    targets.row(i) = c.marker_point.transpose();
    mean_px += c.pixel;
  }
  mean_px /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    centered.row(i) = (corrs[static_cast<std::size_t>(i)].pixel - mean_px).transpose();
  }
  const Eigen::Vector2d spread = Eigen::JacobiSVD<Eigen::MatrixXd>(centered).singularValues();
  if (!(spread(0) > 0.0) || spread(1) <= 1e-9 * spread(0)) {
    throw Error(ErrorKind::DegeneratePixelConfiguration, "correspondence pixels are collinear");
  }
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::MatrixXd>(design).singularValues();
  if (!(sv(2) > 0.0) || sv(0) / sv(2) >= kMaxCondition) {
    throw Error(ErrorKind::IllConditioned, "design matrix condition number >= 1e8");
  }

  const Eigen::MatrixXd coeffs = design.colPivHouseholderQr().solve(targets);  // 3x3, rows u,v,1
  const Mat3 affine = coeffs.transpose();
  return refine_shear_free(CalibrationMatrix::from_affine(affine), corrs);
}

double fit_rms(const CalibrationMatrix& m, std::span<const Correspondence> corrs) {
  if (corrs.empty()) return 0.0;
  return std::sqrt(solve_cost(m, corrs) / static_cast<double>(corrs.size()));
}

CalibrationErrorStats calibration_error(const CalibrationMatrix& matrix,
                                        std::span<const HeldOutFrame> heldout,
                                        const NWireGeometry& geom,
                                        const RigidTransform& t_cam_from_phantom,
                                        const ErrorOptions& options) {
  const RigidTransform phantom_from_cam = invert(t_cam_from_phantom);
  std::vector<double> distances;
  CalibrationErrorStats stats;

  for (const auto& h : heldout) {
    std::vector<std::pair<Vec2, int>> labeled;
    if (options.source == SpotSource::Annotations) {
      for (const auto& s : h.frame.annotations) labeled.emplace_back(s.pixel, s.id);
    } else {
      try {
        const auto spots = segment_spots(h.frame, options.segmentation);
        const auto pixels = match_nwires(spots, options.match).by_wire();
        for (int k = 0; k < 9; ++k) labeled.emplace_back(pixels[static_cast<std::size_t>(k)], k);
      } catch (const Error& e) {
        spdlog::warn("calibration_error: skipping frame {}: {}", h.frame.frame_index, e.what());
        ++stats.n_skipped;
        continue;
      }
    }
    const RigidTransform phantom_from_marker = compose(phantom_from_cam, h.t_cam_from_marker);
    for (const auto& [pixel, wire] : labeled) {
      const Vec3 p = phantom_from_marker.apply(matrix.to_marker(pixel));
      distances.push_back(point_segment_distance(p, geom.wire(WireId::from_index(wire))));
    }
    ++stats.n_frames;
  }
  if (distances.empty()) {
    throw Error(ErrorKind::MatchFailed, "no usable held-out frame");
  }

  const double n = static_cast<double>(distances.size());
  stats.n_spots = static_cast<int>(distances.size());
  stats.mean = std::accumulate(distances.begin(), distances.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : distances) ss += (d - stats.mean) * (d - stats.mean);
  stats.sd = distances.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return stats;
}

}  // namespace uscal
