#include <doctest.h>

#include <chrono>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/register.hpp"
#include "uscal/session.hpp"

using namespace uscal;
using uscal::test::Gen;
using uscal::test::rotation_error_deg;

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

double sum_sq(const RigidTransform& t, const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  double s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) s += (t.apply(src[i]) - dst[i]).squaredNorm();
  return s;
}

// Rotation about `pivot` followed by a shift, applied on the scene side.
RigidTransform perturb_about(const RigidTransform& pose, const RigidTransform& p, const Vec3& pivot) {
  const RigidTransform around{p.rotation, pivot - p.rotation * pivot + p.translation};
  return compose(around, pose);
}

struct PhantomScene {
  SimulatedSession session{CalibrationScenario::noiseless(), 7};
  TriangleMesh mesh = make_phantom_mesh({});
  PointCloud roi = crop_roi(to_point_cloud(session.frame(0).depth), session.setup().phantom_roi_center,
                            session.setup().phantom_roi_radius);
};

const PhantomScene& phantom_scene() {
  static const PhantomScene scene;
  return scene;
}

}  // namespace

TEST_CASE("umeyama recovers random rigid transforms exactly") {
  Gen g(41);
  for (int seed = 0; seed < 100; ++seed) {
    const RigidTransform truth = g.transform(500.0);
    std::vector<Vec3> src, dst;
    const int n = g.integer(3, 200);
    for (int i = 0; i < n; ++i) {
      src.push_back(g.vec3(100.0));
      dst.push_back(truth.apply(src.back()));
    }
    const RigidTransform fit = umeyama_fit(src, dst);
    CHECK(fit.is_valid());
    CHECK((fit.translation - truth.translation).norm() < 1e-10);
    CHECK(rotation_error_deg(fit.rotation, truth.rotation) < 1e-10);
  }
}

TEST_CASE("umeyama errors and optimality") {
  std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {5, 5, 5}};
  CHECK(kind_of([&] { umeyama_fit(line, line); }) == ErrorKind::DegenerateConfiguration);
  std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  CHECK(kind_of([&] { umeyama_fit(two, two); }) == ErrorKind::DegenerateConfiguration);

  Gen g(42);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform truth = g.transform(50.0);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 30; ++i) {
      src.push_back(g.vec3(50.0));
      dst.push_back(truth.apply(src.back()) + Vec3(g.gauss(0.5), g.gauss(0.5), g.gauss(0.5)));
    }
    const RigidTransform fit = umeyama_fit(src, dst);
    const double best = sum_sq(fit, src, dst);
    for (int k = 0; k < 20; ++k) {
      const RigidTransform nudged = compose(g.perturbation(1e-3, 1e-4), fit);
      CHECK(sum_sq(nudged, src, dst) >= best - 1e-9);
    }
  }
}

TEST_CASE("kd-tree agrees with brute force") {
  Gen g(43);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back(g.vec3(100.0));
  const KdTree tree(pts);
  std::vector<std::uint8_t> mask(pts.size());
  for (auto& m : mask) m = g.integer(0, 1);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q = g.vec3(120.0);
    const double radius = g.uniform(1.0, 60.0);
    for (const auto* use : {static_cast<std::vector<std::uint8_t>*>(nullptr), &mask}) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (use && !(*use)[k]) continue;
        best = std::min(best, (pts[k] - q).squaredNorm());
      }
      const auto hit = tree.nearest(q, radius, use);
      if (best > radius * radius) {
        CHECK_FALSE(hit.has_value());
      } else {
        REQUIRE(hit.has_value());
        CHECK(hit->dist2 == best);
        CHECK((pts[hit->index] - q).squaredNorm() == best);
      }
    }
  }
  CHECK_FALSE(KdTree{}.nearest(Vec3::Zero(), 1e9).has_value());
}

TEST_CASE("surface sampling") {
  const TriangleMesh cube = make_cube_mesh(30.0);
  const PointCloud a = sample_mesh_surface(cube, 3.0);
  const PointCloud b = sample_mesh_surface(cube, 3.0);
  CHECK(a.points == b.points);
  CHECK(a.size() > 100);
  for (const Vec3& p : a.points) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& t : cube.triangles) {
      d = std::min(d, (closest_point_on_triangle(p, cube.vertices[t[0]], cube.vertices[t[1]], cube.vertices[t[2]]) - p).norm());
    }
    CHECK(d < 1e-9);
  }
  CHECK(sample_mesh_surface(cube, 6.0).size() < a.size());
}

TEST_CASE("ICP on point sets") {
  Gen g(44);
  const PointCloud model = sample_mesh_surface(make_marker_mesh({}), 2.0);
  IcpParams params;
  params.convergence_delta_rms = 1e-9;

  const RegistrationResult id_result = icp(model, model, RigidTransform::identity(), params);
  const RigidTransform& id_fit = id_result.pose;
  CHECK(id_result.iterations <= 2);
  CHECK(id_fit.translation.norm() < 1e-9);
  CHECK(rotation_angle(id_fit.rotation) < 1e-9);

  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform truth = g.transform(100.0);
    const PointCloud scene = transformed(model, truth, model.frame);
    const RigidTransform init = perturb_about(truth, g.perturbation(5.0, deg2rad(5.0)), truth.apply(Vec3(15, 15, 5)));
    const RegistrationResult r = icp(model, scene, init, params);
    CHECK((r.pose.translation - truth.translation).norm() < 0.01);
    CHECK(rotation_error_deg(r.pose.rotation, truth.rotation) < 0.01);
    for (std::size_t k = 1; k < r.rms_history.size(); ++k) CHECK(r.rms_history[k] <= r.rms_history[k - 1]);
  }

  const PointCloud far = transformed(model, RigidTransform::from_translation(Vec3(0, 0, 500)), model.frame);
  CHECK(kind_of([&] { icp(model, far, RigidTransform::identity(), params); }) == ErrorKind::NoCorrespondences);
}

TEST_CASE("ICP recovers perturbed phantom poses") {
  const PhantomScene& s = phantom_scene();
  const RigidTransform truth = s.session.truth().t_cam_from_phantom;
  const IcpModel model(s.mesh, 3.0);
  const Vec3 pivot = truth.apply(model.centroid);
  Gen g(45);
  int ok = 0;
  const int n = 10;
  for (int seed = 0; seed < n; ++seed) {
    const RigidTransform p = g.perturbation(g.uniform(0.0, 10.0), deg2rad(g.uniform(0.0, 10.0)));
    const RegistrationResult r = icp(model, s.roi, perturb_about(truth, p, pivot), IcpParams{});
    for (std::size_t k = 1; k < r.rms_history.size(); ++k) CHECK(r.rms_history[k] <= r.rms_history[k - 1]);
    const bool good = pose_offset(truth, r.pose).center_offset < 0.5 &&
                      rotation_error_deg(truth.rotation, r.pose.rotation) < 0.5;
    ok += good ? 1 : 0;
  }
  CHECK(ok >= 9);
}

TEST_CASE("localize the phantom from the operator's ROI") {
  const PhantomScene& s = phantom_scene();
  const SessionSetup& setup = s.session.setup();
  const RigidTransform truth = s.session.truth().t_cam_from_phantom;
  const RegistrationResult r = localize_model(s.mesh, to_point_cloud(s.session.frame(0).depth),
                                              setup.phantom_roi_center, setup.phantom_roi_radius, IcpParams{},
                                              {setup.phantom_rotation_hint, true});
  CHECK(r.converged);
  CHECK((r.pose.translation - truth.translation).norm() < 0.5);
  CHECK(rotation_error_deg(r.pose.rotation, truth.rotation) < 0.5);

  CHECK(kind_of([&] {
          localize_model(s.mesh, s.roi, Vec3(0, 0, 5000), 10.0, IcpParams{});
        }) == ErrorKind::EmptyRoi);
}

TEST_CASE("tracking: frozen, small moves, teleports and speed") {
  const PhantomScene& s = phantom_scene();
  RegistrationResult init;
  init.pose = s.session.truth().t_cam_from_phantom;
  const IcpParams params;

  TrackerState frozen = start_tracker(s.mesh, init, params, true);
  const RigidTransform fixed = frozen.last_pose;
  for (int k = 0; k < 5; ++k) {
    const PointCloud moved =
        transformed(s.roi, RigidTransform::from_translation(Vec3(k * 3.0, 0, 0)), s.roi.frame);
    auto [next, result] = track_step(std::move(frozen), moved, params);
    frozen = std::move(next);
    CHECK(frozen.last_pose.rotation == fixed.rotation);
    CHECK(frozen.last_pose.translation == fixed.translation);
  }

  const TriangleMesh marker = make_marker_mesh({});
  IcpParams mp;
  mp.model_downsample_spacing = 3.0;
  const RigidTransform start(axis_angle(Vec3(1, 2, 0.5).normalized(), 0.7), Vec3(20, -10, 480));
  const PointCloud cloud0 = to_point_cloud(render_depth(marker, start, CameraIntrinsics{}, DepthNoiseModel::none(), 0));
  init.pose = start;
  TrackerState tracker = start_tracker(marker, init, mp);

  const RigidTransform step = compose(RigidTransform::from_translation(Vec3(2, 0, 0)), start);
  const PointCloud cloud1 = to_point_cloud(render_depth(marker, step, CameraIntrinsics{}, DepthNoiseModel::none(), 1));
  auto [moved, r1] = track_step(tracker, cloud1, mp);
  CHECK_FALSE(moved.lost);
  CHECK((moved.last_pose.translation - step.translation).norm() < 0.05);

  const PointCloud gone =
      transformed(cloud1, RigidTransform::from_translation(Vec3(300, 0, 0)), cloud1.frame);
  auto [lost, r2] = track_step(moved, gone, mp);
  CHECK(lost.lost);
  CHECK(lost.last_pose.translation == moved.last_pose.translation);

  // Moves of up to 10 mm / 10 deg between frames under default depth noise.
  // Noise alone moves the optimum by a few tenths, so success means landing
  // where a fit started at the true pose lands.
  Gen g(71);
  int tracked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform motion = g.perturbation(g.uniform(0.0, 10.0), deg2rad(g.uniform(0.0, 10.0)));
    const RigidTransform target = perturb_about(start, motion, start.apply(Vec3(15, 15, 5)));
    const PointCloud cloud =
        to_point_cloud(render_depth(marker, target, CameraIntrinsics{}, DepthNoiseModel{}, 100 + trial));
    TrackerState at_truth = tracker;
    at_truth.last_pose = target;
    const RigidTransform floor = track_step(at_truth, cloud, mp).first.last_pose;
    const TrackerState next = track_step(tracker, cloud, mp).first;
    if (!next.lost && (next.last_pose.translation - floor.translation).norm() < 0.1 &&
        rotation_error_deg(next.last_pose.rotation, floor.rotation) < 0.1 &&
        (next.last_pose.translation - target.translation).norm() < 1.0) {
      ++tracked;
    }
  }
  MESSAGE(tracked << "/100 moves tracked");
  CHECK(tracked >= 95);

  const int n = 60;
  const auto t0 = std::chrono::steady_clock::now();
  TrackerState t = tracker;
  for (int k = 0; k < n; ++k) t = track_step(std::move(t), cloud0, mp).first;
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("tracking at " << n / seconds << " steps/s");
  CHECK_FALSE(t.lost);
}
