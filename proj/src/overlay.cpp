#include "uscal/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr Colormap make_hot() {
  Colormap map{};
  for (int i = 0; i < 256; ++i) {
    const int r = std::min(255, 2 * i);
    const int g = std::clamp(2 * i - 255, 0, 255);
    map[static_cast<std::size_t>(i)] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), 0};
  }
  return map;
}

constexpr Colormap make_gray() {
  Colormap map{};
  for (int i = 0; i < 256; ++i) {
    const auto v = static_cast<std::uint8_t>(i);
    map[static_cast<std::size_t>(i)] = {v, v, v};
  }
  return map;
}

constexpr Colormap kHot = make_hot();
constexpr Colormap kGray = make_gray();

// Removes round-off so that pixel-exact warps sample pixel-exact sources.
double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

void check_convex(const Quad& q) {
  const double scale = std::max(1.0, (q[2] - q[0]).norm() * (q[3] - q[1]).norm());
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 e1 = q[(i + 1) % 4] - q[i];
    const Vec2 e2 = q[(i + 2) % 4] - q[(i + 1) % 4];
    const double c = cross(e1, e2);
    if (std::abs(c) <= 1e-12 * scale) throw Error(ErrorKind::DegenerateQuad, "quad has collinear corners");
    const int s = c > 0.0 ? 1 : -1;
    if (sign != 0 && s != sign) throw Error(ErrorKind::DegenerateQuad, "quad is not convex");
    sign = s;
  }
}

}  // namespace

Quad image_quad(const CalibrationMatrix& matrix, const RigidTransform& t_cam_from_marker,
                const CameraIntrinsics& k, int us_width, int us_height) {
  const std::array<Vec2, 4> corners{Vec2(0, 0), Vec2(us_width, 0), Vec2(us_width, us_height),
                                    Vec2(0, us_height)};
  Quad quad;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec3 p = t_cam_from_marker.apply(matrix.to_marker(corners[i]));
    if (p.z() <= 0.0) throw Error(ErrorKind::BehindCamera, "ultrasound corner behind the camera");
    quad[i] = project(k, p);
  }
  return quad;
}

const Colormap& colormap(std::string_view name) {
  if (name == "hot") return kHot;
  if (name == "gray") return kGray;
  throw Error(ErrorKind::InvalidArgument, "unknown colormap '" + std::string(name) + "'");
}

Mat3 quad_homography(const Quad& quad, int us_width, int us_height) {
  const std::array<Vec2, 4> src{Vec2(0, 0), Vec2(us_width, 0), Vec2(us_width, us_height), Vec2(0, us_height)};
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[static_cast<std::size_t>(i)].x(), y = src[static_cast<std::size_t>(i)].y();
    const double u = quad[static_cast<std::size_t>(i)].x(), v = quad[static_cast<std::size_t>(i)].y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorKind::DegenerateQuad, "quad homography is singular");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Mat3 m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return m;
}

RgbFrame composite(const RgbFrame& rgb, const USFrame& us, const Quad& quad, std::string_view colormap_name,
                   double opacity) {
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw Error(ErrorKind::InvalidArgument, "opacity must be in [0, 1]");
  const Colormap& map = colormap(colormap_name);
  for (const auto& c : quad) {
    if (!c.allFinite()) throw Error(ErrorKind::DegenerateQuad, "quad has non-finite corners");
  }
  check_convex(quad);
  RgbFrame out = rgb;
  if (opacity == 0.0) return out;

  const Mat3 to_us = quad_homography(quad, us.width, us.height).inverse();
  double umin = quad[0].x(), umax = umin, vmin = quad[0].y(), vmax = vmin;
  for (const auto& c : quad) {
    umin = std::min(umin, c.x());
    umax = std::max(umax, c.x());
    vmin = std::min(vmin, c.y());
    vmax = std::max(vmax, c.y());
  }
  const int u0 = std::max(0, static_cast<int>(std::ceil(umin)));
  const int u1 = std::min(rgb.width - 1, static_cast<int>(std::floor(umax)));
  const int v0 = std::max(0, static_cast<int>(std::ceil(vmin)));
  const int v1 = std::min(rgb.height - 1, static_cast<int>(std::floor(vmax)));

  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const Vec3 h = to_us * Vec3(u, v, 1.0);
      if (!(h.z() > 0.0 || h.z() < 0.0)) continue;
      const double su = snap(h.x() / h.z());
      const double sv = snap(h.y() / h.z());
      if (!(su >= 0.0 && su < us.width && sv >= 0.0 && sv < us.height)) continue;
      const auto& color = map[us.at(static_cast<int>(su), static_cast<int>(sv))];
      std::uint8_t* px = out.at(u, v);
      for (std::size_t c = 0; c < 3; ++c) {
        const double blended = (1.0 - opacity) * px[c] + opacity * color[c];
        px[c] = static_cast<std::uint8_t>(std::lround(blended));
      }
    }
  }
  return out;
}

RgbFrame shade_depth(const DepthMap& depth) {
  RgbFrame out(depth.width(), depth.height());
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double z : depth.depths) {
    if (z > 0.0) {
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  const double range = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < depth.depths.size(); ++i) {
    const double z = depth.depths[i];
    if (z <= 0.0) continue;
    const auto g = static_cast<std::uint8_t>(std::lround(235.0 - 185.0 * (z - lo) / range));
    out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = g;
  }
  return out;
}

}  // namespace uscal
