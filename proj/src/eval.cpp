#include "uscal/eval.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <spdlog/spdlog.h>

#include "uscal/error.hpp"
#include "uscal/session.hpp"

namespace uscal {

namespace {

constexpr double kSweepDepthMm = 20.0;  // edge depth below the probe face

// Seed streams of a cube run.
enum Stream : std::uint64_t {
  kBoardDepth = 10,
  kDetections = 11,
  kSweepDepth = 12,
  kMarkerHint = 13,
  kSweepUs = 14,
};

}  // namespace

void BoardModel::validate() const {
  if (corners.size() < 3) throw Error(ErrorKind::InvalidGeometry, "board needs at least 3 corners");
  for (const auto& c : corners) {
    if (std::abs(c.z()) > 1e-9) throw Error(ErrorKind::InvalidGeometry, "board corners must lie on z = 0");
  }
  bool spread = false;
  for (std::size_t i = 2; i < corners.size() && !spread; ++i) {
    spread = (corners[1] - corners[0]).cross(corners[i] - corners[0]).norm() > 1e-9;
  }
  if (!spread) throw Error(ErrorKind::InvalidGeometry, "board corners are collinear");
  if (!cube_pose_in_world.is_valid()) throw Error(ErrorKind::InvalidGeometry, "invalid cube pose");
}

BoardModel make_board(const BoardParams& p) {
  if (!(p.square_size > 0.0) || !(p.cube_size > 0.0) || !(p.size > 0.0)) {
    throw Error(ErrorKind::InvalidGeometry, "board dimensions must be positive");
  }
  if (p.square_offset + 0.5 * p.square_size > 0.5 * p.size) {
    throw Error(ErrorKind::InvalidGeometry, "marker squares do not fit on the board");
  }
  BoardModel board;
  const double h = 0.5 * p.square_size;
  const std::array<Vec2, 4> centers{Vec2(-p.square_offset, -p.square_offset), Vec2(p.square_offset, -p.square_offset),
                                    Vec2(p.square_offset, p.square_offset), Vec2(-p.square_offset, p.square_offset)};
  const std::array<Vec2, 4> offsets{Vec2(-h, -h), Vec2(h, -h), Vec2(h, h), Vec2(-h, h)};
  for (const auto& c : centers) {
    for (const auto& o : offsets) board.corners.emplace_back(c.x() + o.x(), c.y() + o.y(), 0.0);
  }
  const Mat3 r = rot_z(deg2rad(p.cube_yaw_deg));
  const double s = p.cube_size;
  board.cube_pose_in_world = {r, -(r * Vec3(0.5 * s, 0.5 * s, 0.0))};
  return board;
}

TriangleMesh make_board_mesh(const BoardParams& p) {
  return make_box({-0.5 * p.size, -0.5 * p.size, -5.0}, {0.5 * p.size, 0.5 * p.size, 0.0});
}

std::vector<CornerDetection> simulate_detections(const BoardModel& board, const RigidTransform& t_cam_from_world,
                                                 const CameraIntrinsics& k, double pixel_sigma,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<CornerDetection> out;
  for (std::size_t i = 0; i < board.corners.size(); ++i) {
    const Vec3 p = t_cam_from_world.apply(board.corners[i]);
    // Draw noise for every corner so detections do not shift the stream.
    const Vec2 noise(gauss(rng), gauss(rng));
    if (p.z() <= 0.0) continue;
    const Vec2 px = project(k, p) + pixel_sigma * noise;
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() > k.width - 1 || px.y() > k.height - 1) continue;
    out.push_back({static_cast<int>(i), px});
  }
  return out;
}

RigidTransform board_pose_from_detections(const BoardModel& board,
                                          const std::vector<CornerDetection>& detections,
                                          const DepthMap& depth) {
  std::vector<Vec3> world, cam;
  for (const auto& d : detections) {
    if (d.corner_id < 0 || static_cast<std::size_t>(d.corner_id) >= board.corners.size()) {
      throw Error(ErrorKind::InvalidArgument, "unknown corner id " + std::to_string(d.corner_id));
    }
    const auto z = sample_depth(depth, d.pixel);
    if (!z) continue;
    world.push_back(board.corners[static_cast<std::size_t>(d.corner_id)]);
    cam.push_back(unproject(depth.intrinsics, d.pixel, *z));
  }
  if (world.size() < 3) {
    throw Error(ErrorKind::TooFewDetections,
                "need 3 corners with depth, got " + std::to_string(world.size()));
  }
  return umeyama_fit(world, cam);
}

PointCloud collect_edge_points(const std::vector<EdgeFrame>& frames, const CalibrationMatrix& matrix) {
  PointCloud cloud;
  for (const auto& f : frames) {
    for (const auto& px : f.pixels) cloud.points.push_back(f.t_cam_from_marker.apply(matrix.to_marker(px)));
  }
  return cloud;
}

CubeEvalReport evaluate_cube(const PointCloud& points, const CubeEdgeModel& model,
                             const RigidTransform& t_cam_from_world_gt,
                             const RigidTransform& cube_pose_in_world, const IcpParams& params,
                             double sample_step) {
  if (points.empty()) throw Error(ErrorKind::NoCorrespondences, "no localized edge points");
  if (model.edges.empty()) throw Error(ErrorKind::InvalidArgument, "cube model has no edges");
  if (!(sample_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample step must be > 0");

  const RigidTransform t_cam_from_cube = compose(t_cam_from_world_gt, cube_pose_in_world);
  PointCloud truth;
  truth.frame = "camera";
  std::vector<Segment> edges_cam;
  for (const auto& e : model.edges) {
    const Segment s{t_cam_from_cube.apply(e.a), t_cam_from_cube.apply(e.b)};
    edges_cam.push_back(s);
    const int n = std::max(1, static_cast<int>(std::ceil(s.length() / sample_step)));
    for (int j = 0; j <= n; ++j) truth.points.push_back(s.a + (s.b - s.a) * (static_cast<double>(j) / n));
  }

  RegistrationResult fit = icp(truth, points, RigidTransform::identity(), params);

  // Mean distance to the fitted edges themselves, not to their samples.
  struct Pairing {
    std::vector<Vec3> on_edge;
    std::vector<Vec3> scene;
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  const auto pair_up = [&](const RigidTransform& pose) {
    const RigidTransform to_truth = invert(pose);
    Pairing out;
    for (const auto& p : points.points) {
      const Vec3 q = to_truth.apply(p);
      Vec3 best_point = Vec3::Zero();
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : edges_cam) {
        const Vec3 c = closest_point_on_segment(q, s);
        const double d = (q - c).norm();
        if (d < best) {
          best = d;
          best_point = c;
        }
      }
      if (best <= params.max_correspondence_distance) {
        out.on_edge.push_back(best_point);
        out.scene.push_back(p);
        out.sum += best;
        out.sum_sq += best * best;
      }
    }
    return out;
  };

  // Sampled edges leave the fit stuck between samples; finish against the
  // segments themselves, to a fixed point so the result does not depend on
  // where the sampled stage stopped.
  constexpr int kMaxSegmentIterations = 2000;
  Pairing pairs = pair_up(fit.pose);
  for (int it = 0; it < kMaxSegmentIterations && pairs.scene.size() >= 3; ++it) {
    RigidTransform next;
    try {
      next = umeyama_fit(pairs.on_edge, pairs.scene);
    } catch (const Error&) {
      break;
    }
    Pairing trial = pair_up(next);
    const double rms_now = std::sqrt(pairs.sum_sq / static_cast<double>(pairs.scene.size()));
    if (trial.scene.size() < 3) break;
    const double rms_next = std::sqrt(trial.sum_sq / static_cast<double>(trial.scene.size()));
    // Near the minimum the RMS is flat to roundoff, so stop on the pose step.
    if (rms_next > rms_now * (1.0 + 1e-12)) break;
    const RigidTransform step = compose(next, invert(fit.pose));
    fit.pose = next;
    pairs = std::move(trial);
    if (step.translation.norm() + rotation_angle(step.rotation) * 100.0 < 1e-13) break;
  }

  CubeEvalReport report;
  report.icp_residue = pairs.scene.empty() ? 0.0 : pairs.sum / static_cast<double>(pairs.scene.size());
  report.n_points = static_cast<int>(points.size());
  const RigidTransform centered_gt = compose(t_cam_from_cube, RigidTransform::from_translation(model.center));
  const PoseOffset off = pose_offset(centered_gt, compose(fit.pose, centered_gt));
  report.center_offset = off.center_offset;
  report.euler_offsets = off.euler_offsets;
  report.gimbal_lock = off.gimbal_lock;
  return report;
}

CubeScenario::CubeScenario() : t_marker_from_image(default_true_calibration(marker)) {}

CubeScenario CubeScenario::noiseless() {
  CubeScenario s;
  s.depth_noise = DepthNoiseModel::none();
  s.detection_sigma_px = 0.0;
  s.speckle = SpeckleParams::none();
  return s;
}

RigidTransform edge_sweep_pose(const CubeEdgeModel& model, std::size_t edge, int i, int n, double tilt_deg,
                               const ImageGeometry& image) {
  const Segment& e = model.edges.at(edge);
  const Vec3 d = e.direction();
  const Vec3 mid = 0.5 * (e.a + e.b);
  // The probe looks at the edge from outside, toward the cube center.
  Vec3 w = model.center - mid;
  w -= w.dot(d) * d;
  w.normalize();
  const double s = (i + 0.5) / n;
  const Vec3 p = e.a + s * (e.b - e.a);
  const Vec3 normal = axis_angle(w, deg2rad(tilt_deg * std::sin(2.0 * kPi * s))) * d;
  const Vec3 u = w.cross(normal);
  Mat3 r;
  r.col(0) = u;
  r.col(1) = w;
  r.col(2) = normal;
  const double half_width = 0.5 * (image.width - 1) * image.sx;
  return {r, p - half_width * u - kSweepDepthMm * w};
}

CubeEvalRun simulate_cube_evaluation(const CubeScenario& sc, const CalibrationMatrix& calibration,
                                     std::uint64_t seed) {
  sc.camera.validate();
  sc.image.validate();
  if (sc.planes_per_edge <= 0) throw Error(ErrorKind::ConfigError, "planes_per_edge must be > 0");

  const BoardModel board = make_board(sc.board);
  const TriangleMesh fixed = merge(make_board_mesh(sc.board),
                                   transformed(make_cube_mesh(sc.board.cube_size), board.cube_pose_in_world));
  const TriangleMesh marker_mesh = make_marker_mesh(sc.marker);
  const Aabb marker_box = bounding_box(marker_mesh);
  const CubeEdgeModel model = make_cube_edges(sc.board.cube_size, sc.edge_ids);

  CubeEvalRun run;
  const double el = deg2rad(sc.camera_elevation_deg);
  const double az = deg2rad(sc.camera_azimuth_deg);
  const Vec3 toward_eye(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  const Vec3 target(0.0, 0.0, 0.5 * sc.board.cube_size);
  const Vec3 near_side(std::cos(az), std::sin(az), 0.0);
  run.t_cam_from_world_true = invert(look_at(target + sc.camera_distance_mm * toward_eye, target, near_side));
  const RigidTransform& t_cam_from_world = run.t_cam_from_world_true;

  // Board ground truth, measured before the probe enters the scene.
  const DepthMap board_depth = render_depth(fixed, t_cam_from_world, sc.camera, sc.depth_noise,
                                            derive_seed(seed, kBoardDepth, 0));
  const auto detections = simulate_detections(board, t_cam_from_world, sc.camera, sc.detection_sigma_px,
                                              derive_seed(seed, kDetections, 0));
  run.t_cam_from_world_board = board_pose_from_detections(board, detections, board_depth);

  IcpParams marker_icp = sc.icp;
  marker_icp.model_downsample_spacing = sc.marker.downsample_spacing;
  const RigidTransform t_image_from_marker = invert(sc.t_marker_from_image);
  std::vector<EdgeFrame> frames;
  std::uint64_t frame_no = 0;
  for (std::size_t e = 0; e < model.edges.size(); ++e) {
    TrackerState tracker;
    for (int i = 0; i < sc.planes_per_edge; ++i, ++frame_no) {
      const RigidTransform t_cube_from_image =
          edge_sweep_pose(model, e, i, sc.planes_per_edge, sc.sweep_tilt_deg, sc.image);
      const RigidTransform t_world_from_marker =
          compose(board.cube_pose_in_world, compose(t_cube_from_image, t_image_from_marker));
      const TriangleMesh scene = merge(fixed, transformed(marker_mesh, t_world_from_marker));
      const PointCloud cloud = to_point_cloud(
          render_depth(scene, t_cam_from_world, sc.camera, sc.depth_noise, derive_seed(seed, kSweepDepth, frame_no)));

      RigidTransform t_cam_from_marker;
      if (i == 0) {
        // The operator points the tracker at the marker for each sweep.
        const RigidTransform truth = compose(t_cam_from_world, t_world_from_marker);
        const Mat3 hint = perturbed_rotation(truth.rotation, sc.operator_hint_error_deg,
                                             derive_seed(seed, kMarkerHint, e));
        const RegistrationResult loc =
            localize_model(marker_mesh, cloud, truth.apply(marker_box.center()),
                           marker_box.half_diagonal() + 10.0, marker_icp, {hint, true});
        tracker = start_tracker(marker_mesh, loc, marker_icp);
        t_cam_from_marker = loc.pose;
      } else {
        auto [next, result] = track_step(std::move(tracker), cloud, marker_icp);
        tracker = std::move(next);
        if (tracker.lost) {
          spdlog::warn("cube sweep frame {}: marker tracking lost", frame_no);
          ++run.n_frames_lost;
          continue;
        }
        t_cam_from_marker = tracker.last_pose;
      }

      std::vector<UsSpot> spots;
      for (const auto& hit : intersect_cube_edges(model, invert(t_cube_from_image), sc.image)) {
        spots.push_back({hit.pixel, hit.edge_id});
      }
      const USFrame us = render_us_frame(spots, sc.image, sc.psf_sigma_px, sc.speckle,
                                         derive_seed(seed, kSweepUs, frame_no), static_cast<int>(frame_no));
      EdgeFrame ef;
      ef.t_cam_from_marker = t_cam_from_marker;
      if (sc.spot_source == SpotSource::Annotations) {
        for (const auto& s : us.annotations) ef.pixels.push_back(s.pixel);
      } else {
        ef.pixels = segment_spots(us, sc.segmentation);
      }
      frames.push_back(std::move(ef));
      ++run.n_frames;
    }
  }

  run.report = evaluate_cube(collect_edge_points(frames, calibration), model, run.t_cam_from_world_board,
                             board.cube_pose_in_world, sc.icp);
  return run;
}

}  // namespace uscal
