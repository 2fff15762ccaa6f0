#include <doctest.h>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/eval.hpp"

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

RigidTransform camera_over_board() {
  return invert(look_at(Vec3(-180, -220, 400), Vec3(0, 0, 25), Vec3(0, 0, -1)));
}

// Points along every selected edge of the true cube, in the camera CS.
PointCloud edge_points(const CubeEdgeModel& model, const RigidTransform& t_cam_from_cube, double step) {
  PointCloud cloud;
  cloud.frame = "camera";
  for (const Segment& e : model.edges) {
    for (double s = 0.5 * step; s < e.length(); s += step) {
      cloud.points.push_back(t_cam_from_cube.apply(e.a + (e.b - e.a) * (s / e.length())));
    }
  }
  return cloud;
}

}  // namespace

TEST_CASE("board model") {
  const BoardParams params;
  const BoardModel board = make_board(params);
  REQUIRE(board.corners.size() == 16);
  for (const Vec3& c : board.corners) {
    CHECK(c.z() == 0.0);
    CHECK(std::abs(c.x()) <= 0.5 * params.size);
  }
  // The cube stands centered on the board.
  const Vec3 center = board.cube_pose_in_world.apply(Vec3::Constant(0.5 * params.cube_size));
  CHECK((center - Vec3(0, 0, 25)).norm() < 1e-12);
  CHECK(rad2deg(rotation_angle(board.cube_pose_in_world.rotation)) == doctest::Approx(params.cube_yaw_deg));

  BoardParams bad;
  bad.square_offset = 200.0;
  CHECK(kind_of([&] { make_board(bad); }) == ErrorKind::InvalidGeometry);
}

TEST_CASE("board pose from noiseless detections is exact") {
  const BoardParams params;
  const BoardModel board = make_board(params);
  const CameraIntrinsics k;
  const RigidTransform truth = camera_over_board();
  const DepthMap depth = render_depth(make_board_mesh(params), truth, k, DepthNoiseModel::none(), 0);
  const auto detections = simulate_detections(board, truth, k, 0.0, 1);
  CHECK(detections.size() == 16);
  for (const CornerDetection& d : detections) {
    CHECK((d.pixel - project(k, truth.apply(board.corners[d.corner_id]))).norm() < 1e-12);
  }
  const RigidTransform fit = board_pose_from_detections(board, detections, depth);
  CHECK((fit.translation - truth.translation).norm() < 1e-6);
  CHECK(rotation_error_deg(fit.rotation, truth.rotation) < 1e-6);

  // Noisy corners still land close.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto noisy = simulate_detections(board, truth, k, 0.5, seed);
    const RigidTransform rough = board_pose_from_detections(board, noisy, depth);
    CHECK((rough.translation - truth.translation).norm() < 2.0);
    CHECK(rotation_error_deg(rough.rotation, truth.rotation) < 0.5);
  }

  const std::vector<CornerDetection> two(detections.begin(), detections.begin() + 2);
  CHECK(kind_of([&] { board_pose_from_detections(board, two, depth); }) == ErrorKind::TooFewDetections);
}

TEST_CASE("edge points through the calibration chain") {
  Gen g(61);
  const CalibrationMatrix m = CalibrationMatrix::from_decomposition(0.1, 0.12, g.transform(100.0));
  std::vector<EdgeFrame> frames(3);
  for (auto& f : frames) {
    f.t_cam_from_marker = g.transform(300.0);
    for (int i = 0; i < 4; ++i) f.pixels.emplace_back(g.uniform(0, 511), g.uniform(0, 511));
  }
  const EdgeFrame origin{{Vec2(0, 0)}, RigidTransform::identity()};
  const PointCloud at_origin = collect_edge_points({origin}, m);
  REQUIRE(at_origin.size() == 1);
  CHECK((at_origin.points[0] - m.marker_from_image().translation).norm() < 1e-12);

  const PointCloud cloud = collect_edge_points(frames, m);
  REQUIRE(cloud.size() == 12);
  CHECK(cloud.frame == "camera");
  std::size_t i = 0;
  for (const auto& f : frames) {
    for (const Vec2& px : f.pixels) {
      const Vec3 expected = f.t_cam_from_marker.apply(
          m.marker_from_image().apply(Vec3(px.x() * m.sx, px.y() * m.sy, 0.0)));
      CHECK((cloud.points[i++] - expected).norm() < 1e-9);
    }
  }
}

TEST_CASE("cube evaluation oracles") {
  const BoardModel board = make_board({});
  const CubeEdgeModel model = make_cube_edges(50.0, default_cube_edge_selection());
  const RigidTransform cam = camera_over_board();
  const RigidTransform t_cam_from_cube = compose(cam, board.cube_pose_in_world);
  const PointCloud exact = edge_points(model, t_cam_from_cube, 2.0);

  const CubeEvalReport zero = evaluate_cube(exact, model, cam, board.cube_pose_in_world, IcpParams{});
  CHECK(zero.icp_residue < 1e-6);
  CHECK(zero.center_offset < 1e-6);
  for (double a : zero.euler_offsets) CHECK(std::abs(a) < 1e-6);
  CHECK(zero.n_points == static_cast<int>(exact.size()));

  Gen g(62);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 shift = 3.0 * g.unit();
    const PointCloud moved = transformed(exact, RigidTransform::from_translation(shift), "camera");
    const CubeEvalReport r = evaluate_cube(moved, model, cam, board.cube_pose_in_world, IcpParams{});
    CHECK(r.center_offset == doctest::Approx(3.0).epsilon(0.1));
    CHECK(r.icp_residue < 1e-6);
  }

  // The report does not depend on where the camera is.
  PointCloud noisy = exact;
  for (Vec3& p : noisy.points) p += Vec3(g.gauss(0.5), g.gauss(0.5), g.gauss(0.5));
  const CubeEvalReport base = evaluate_cube(noisy, model, cam, board.cube_pose_in_world, IcpParams{});
  const RigidTransform motion = g.transform(100.0, 0.3);
  const CubeEvalReport moved = evaluate_cube(transformed(noisy, motion, "camera"), model, compose(motion, cam),
                                             board.cube_pose_in_world, IcpParams{});
  CHECK(std::abs(moved.icp_residue - base.icp_residue) < 1e-9);
  CHECK(std::abs(moved.center_offset - base.center_offset) < 1e-9);

  CHECK(kind_of([&] { evaluate_cube(PointCloud{}, model, cam, board.cube_pose_in_world, IcpParams{}); }) ==
        ErrorKind::NoCorrespondences);
}

TEST_CASE("short noiseless cube run") {
  CubeScenario sc = CubeScenario::noiseless();
  sc.planes_per_edge = 6;
  const CubeEvalRun run =
      simulate_cube_evaluation(sc, CalibrationMatrix::from_decomposition(sc.image.sx, sc.image.sy, sc.t_marker_from_image), 3);
  CHECK(run.n_frames == 30);
  CHECK(run.n_frames_lost == 0);
  CHECK(run.report.icp_residue < 0.1);
  CHECK(run.report.center_offset < 0.1);
  for (double a : run.report.euler_offsets) CHECK(std::abs(a) < 0.1);
}
