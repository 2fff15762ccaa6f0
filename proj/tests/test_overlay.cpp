#include <doctest.h>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/overlay.hpp"

using namespace uscal;
using uscal::test::Gen;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

RgbFrame noise_image(int w, int h, std::uint64_t seed) {
  Gen g(seed);
  RgbFrame f(w, h);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(g.integer(0, 255));
  return f;
}

USFrame ramp(int w, int h) {
  USFrame us;
  us.width = w;
  us.height = h;
  us.pixels.resize(static_cast<std::size_t>(w) * h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) us.pixels[static_cast<std::size_t>(v) * w + u] = static_cast<std::uint8_t>((u * 7 + v * 3) % 256);
  return us;
}

Vec2 diagonal_crossing(const Quad& q) {
  // q0 + s (q2 - q0) = q1 + t (q3 - q1)
  Eigen::Matrix2d a;
  a.col(0) = q[2] - q[0];
  a.col(1) = q[1] - q[3];
  const Vec2 st = a.colPivHouseholderQr().solve(q[1] - q[0]);
  return q[0] + st.x() * (q[2] - q[0]);
}

}  // namespace

TEST_CASE("fronto-parallel quad in closed form") {
  const CameraIntrinsics k;
  const CalibrationMatrix m =
      CalibrationMatrix::from_decomposition(0.1, 0.1, RigidTransform::from_translation(Vec3(-25.6, -25.6, 0)));
  const Quad q = image_quad(m, RigidTransform::from_translation(Vec3(0, 0, 500)), k, 512, 512);
  // 25.6 mm at 500 mm and f = 600 is 30.72 px.
  CHECK((q[0] - Vec2(289.28, 209.28)).norm() < 1e-9);
  CHECK((q[1] - Vec2(350.72, 209.28)).norm() < 1e-9);
  CHECK((q[2] - Vec2(350.72, 270.72)).norm() < 1e-9);
  CHECK((q[3] - Vec2(289.28, 270.72)).norm() < 1e-9);

  CHECK(kind_of([&] { image_quad(m, RigidTransform::from_translation(Vec3(0, 0, -100)), k, 512, 512); }) ==
        ErrorKind::BehindCamera);
}

TEST_CASE("quad is unchanged when camera and probe move together") {
  const CameraIntrinsics k;
  Gen g(71);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const CalibrationMatrix m = CalibrationMatrix::from_decomposition(0.1, 0.1, g.transform(50.0));
    const RigidTransform world_from_cam = look_at(g.vec3(50.0) + Vec3(0, 0, -500), g.vec3(20.0), Vec3(0, 1, 0));
    const RigidTransform world_from_marker = RigidTransform::from_translation(g.vec3(20.0));
    const Quad a = image_quad(m, compose(invert(world_from_cam), world_from_marker), k, 512, 512);
    const RigidTransform motion = g.transform(1000.0);
    const Quad b = image_quad(m, compose(invert(compose(motion, world_from_cam)), compose(motion, world_from_marker)),
                              k, 512, 512);
    for (int c = 0; c < 4; ++c) worst = std::max(worst, (a[c] - b[c]).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("homography maps corners and centers") {
  Gen g(72);
  for (int i = 0; i < 50; ++i) {
    const Vec2 c(g.uniform(200, 400), g.uniform(150, 300));
    const double r = g.uniform(40, 100);
    Quad q;
    for (int j = 0; j < 4; ++j) {
      const double angle = -0.75 * kPi + 0.5 * kPi * j + g.uniform(-0.3, 0.3);
      q[j] = c + r * g.uniform(0.7, 1.3) * Vec2(std::cos(angle), std::sin(angle));
    }
    const Mat3 h = quad_homography(q, 300, 200);
    const std::array<Vec2, 4> corners{Vec2(0, 0), Vec2(300, 0), Vec2(300, 200), Vec2(0, 200)};
    for (int j = 0; j < 4; ++j) {
      const Vec3 p = h * Vec3(corners[j].x(), corners[j].y(), 1.0);
      CHECK((p.head<2>() / p.z() - q[j]).norm() < 1e-9);
    }
    // Projective maps send the rectangle center to the diagonal crossing.
    const Vec3 mid = h * Vec3(150, 100, 1);
    CHECK((mid.head<2>() / mid.z() - diagonal_crossing(q)).norm() < 1e-9);
  }
}

TEST_CASE("compositing") {
  const RgbFrame rgb = noise_image(160, 120, 73);
  const USFrame us = ramp(64, 48);
  const Quad quad{Vec2(40.3, 30.1), Vec2(110.2, 35.7), Vec2(105.9, 90.4), Vec2(45.5, 85.2)};

  CHECK(composite(rgb, us, quad, "hot", 0.0).pixels == rgb.pixels);

  const RgbFrame out = composite(rgb, us, quad, "hot", 0.85);
  int changed = 0;
  for (int v = 0; v < rgb.height; ++v) {
    for (int u = 0; u < rgb.width; ++u) {
      const bool differs = !std::equal(out.at(u, v), out.at(u, v) + 3, rgb.at(u, v));
      if (!differs) continue;
      ++changed;
      CHECK(u >= 40);
      CHECK(u <= 111);
      CHECK(v >= 30);
      CHECK(v <= 91);
    }
  }
  CHECK(changed > 2500);
  CHECK(out.width == rgb.width);

  // A 1:1 quad at full opacity copies the mapped ultrasound pixels.
  const RgbFrame canvas(64, 48);
  const Quad same{Vec2(0, 0), Vec2(64, 0), Vec2(64, 48), Vec2(0, 48)};
  const RgbFrame copy = composite(canvas, us, same, "gray", 1.0);
  for (int v = 0; v < 48; ++v) {
    for (int u = 0; u < 64; ++u) {
      const std::uint8_t x = us.at(u, v);
      CHECK(copy.at(u, v)[0] == x);
      CHECK(copy.at(u, v)[2] == x);
    }
  }

  const Quad line{Vec2(0, 0), Vec2(10, 10), Vec2(20, 20), Vec2(30, 30)};
  CHECK(kind_of([&] { composite(rgb, us, line); }) == ErrorKind::DegenerateQuad);
  const Quad bowtie{Vec2(0, 0), Vec2(50, 50), Vec2(50, 0), Vec2(0, 50)};
  CHECK(kind_of([&] { composite(rgb, us, bowtie); }) == ErrorKind::DegenerateQuad);
  CHECK(kind_of([&] { composite(rgb, us, quad, "viridis"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { composite(rgb, us, quad, "hot", 1.5); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("colormaps") {
  const Colormap& hot = colormap("hot");
  CHECK(hot[0] == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(hot[255][0] == 255);
  CHECK(hot[255][1] == 255);
  for (int i = 1; i < 256; ++i) {
    CHECK(hot[i][0] >= hot[i - 1][0]);
    CHECK(hot[i][1] >= hot[i - 1][1]);
  }
  const Colormap& gray = colormap("gray");
  for (int i = 0; i < 256; ++i) CHECK(gray[i] == std::array<std::uint8_t, 3>{std::uint8_t(i), std::uint8_t(i), std::uint8_t(i)});
}

TEST_CASE("depth shading") {
  DepthMap d(CameraIntrinsics{});
  d.at(10, 10) = 400.0;
  d.at(20, 10) = 600.0;
  const RgbFrame f = shade_depth(d);
  CHECK(f.width == 640);
  CHECK(f.at(0, 0)[0] == 0);
  CHECK(f.at(10, 10)[0] > f.at(20, 10)[0]);
  CHECK(f.at(20, 10)[0] > 0);
}
