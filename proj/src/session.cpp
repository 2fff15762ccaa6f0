#include "uscal/session.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr int kMinCalibrationFrames = 10;
constexpr double kMinOrientationSpreadDeg = 15.0;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace

Mat3 perturbed_rotation(const Mat3& r, double angle_deg, std::uint64_t seed) {
  if (angle_deg == 0.0) return r;
  std::mt19937_64 rng(seed);
  return r * axis_angle(random_unit(rng), deg2rad(angle_deg));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

TrajectorySpec default_trajectory(int n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "a trajectory needs at least 2 poses");
  TrajectorySpec spec;
  for (int k = 0; k < n; ++k) {
    const double s = static_cast<double>(k) / (n - 1);
    ProbePose p;
    p.x0 = 10.0 + 20.0 * s;
    p.about_v_deg = -20.0 + 40.0 * s;
    p.about_u_deg = 12.0 * std::sin(2.0 * kPi * s);
    p.about_n_deg = 5.0 * std::cos(kPi * s);
    spec.poses.push_back(p);
  }
  return spec;
}

RigidTransform probe_plane_pose(const ProbePose& pose, const ImageGeometry& image,
                                const NWireParams& phantom) {
  // Perpendicular slice: u along phantom y, v along depth, normal along x.
  Mat3 base;
  base.col(0) = Vec3::UnitY();
  base.col(1) = Vec3::UnitZ();
  base.col(2) = Vec3::UnitX();
  const double half_width = 0.5 * (image.width - 1) * image.sx;
  const double y_mid = 0.5 * (phantom.y_front + phantom.y_back);
  const RigidTransform t_phantom_from_base{base, Vec3(pose.x0, y_mid - half_width, 0.0)};

  const Vec3 pivot(half_width, 0.0, 0.0);
  const Mat3 r = axis_angle(Vec3::UnitY(), deg2rad(pose.about_v_deg)) *
                 axis_angle(Vec3::UnitX(), deg2rad(pose.about_u_deg)) *
                 axis_angle(Vec3::UnitZ(), deg2rad(pose.about_n_deg));
  const RigidTransform t_base_from_image{r, pivot - r * pivot};
  return compose(t_phantom_from_base, t_base_from_image);
}

RigidTransform default_true_calibration(const MarkerParams& marker) {
  const Aabb b = bounding_box(make_marker_mesh(marker));
  // The marker sits above the probe head and off to the side of the image plane.
  const Mat3 r_image_from_marker = from_euler_zyx(deg2rad(20.0), deg2rad(-10.0), deg2rad(15.0));
  const Vec3 center_in_image(25.6, -90.0, 75.0);
  const RigidTransform t_image_from_marker{r_image_from_marker,
                                           center_in_image - r_image_from_marker * b.center()};
  return invert(t_image_from_marker);
}

CalibrationScenario CalibrationScenario::noiseless() {
  CalibrationScenario s;
  s.depth_noise = DepthNoiseModel::none();
  s.speckle = SpeckleParams::none();
  return s;
}

SimulatedSession::SimulatedSession(const CalibrationScenario& scenario, std::uint64_t seed)
    : scenario_(scenario), seed_(seed) {
  scenario.camera.validate();
  scenario.image.validate();
  scenario.depth_noise.validate();
  if (scenario.trajectory.poses.empty()) {
    throw Error(ErrorKind::ConfigError, "the probe trajectory is empty");
  }
  if (!(scenario.camera_distance_mm > 0.0)) {
    throw Error(ErrorKind::ConfigError, "camera distance must be > 0");
  }

  wires_ = make_nwire_geometry(scenario.phantom);
  phantom_world_ = make_phantom_mesh(scenario.phantom);
  marker_mesh_ = make_marker_mesh(scenario.marker);

  const RigidTransform t_image_from_marker = invert(scenario.t_marker_from_image);
  const int n = static_cast<int>(scenario.trajectory.poses.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    ProbePose p = scenario.trajectory.poses[static_cast<std::size_t>(k)];
    if (scenario.trajectory.jitter_mm > 0.0 || scenario.trajectory.jitter_deg > 0.0) {
      std::mt19937_64 rng(derive_seed(seed, 4, static_cast<std::uint64_t>(k)));
      p.x0 += scenario.trajectory.jitter_mm * gauss(rng);
      p.about_u_deg += scenario.trajectory.jitter_deg * gauss(rng);
      p.about_v_deg += scenario.trajectory.jitter_deg * gauss(rng);
      p.about_n_deg += scenario.trajectory.jitter_deg * gauss(rng);
    }
    t_phantom_from_image_.push_back(probe_plane_pose(p, scenario.image, scenario.phantom));
  }

  // The camera looks down on the phantom from the side opposite the marker.
  const Aabb pb = bounding_box(phantom_world_);
  const Vec3 top_center(pb.center().x(), pb.center().y(), 0.0);
  const double el = deg2rad(scenario.camera_elevation_deg);
  const double az = deg2rad(scenario.camera_azimuth_deg);
  const Vec3 eye = top_center + scenario.camera_distance_mm *
                                    Vec3(-std::cos(el) * std::cos(az), -std::cos(el) * std::sin(az),
                                         -std::sin(el));
  const Aabb mb = bounding_box(marker_mesh_);
  const RigidTransform t_world_from_marker_mid =
      compose(t_phantom_from_image_[static_cast<std::size_t>(n / 2)], t_image_from_marker);
  const Vec3 target = 0.5 * (top_center + t_world_from_marker_mid.apply(mb.center()));
  t_cam_from_world_ = invert(look_at(eye, target, Vec3::UnitY()));

  truth_.t_cam_from_phantom = t_cam_from_world_;
  for (const auto& t_pi : t_phantom_from_image_) {
    truth_.t_cam_from_marker.push_back(compose(t_cam_from_world_, compose(t_pi, t_image_from_marker)));
  }
  truth_.calibration = CalibrationMatrix::from_decomposition(scenario.image.sx, scenario.image.sy,
                                                             scenario.t_marker_from_image);

  setup_.phantom = scenario.phantom;
  setup_.marker = scenario.marker;
  setup_.camera = scenario.camera;
  setup_.image = scenario.image;
  setup_.phantom_roi_center = t_cam_from_world_.apply(pb.center());
  setup_.phantom_roi_radius = pb.half_diagonal() + 10.0;
  setup_.phantom_rotation_hint = perturbed_rotation(t_cam_from_world_.rotation, scenario.operator_hint_error_deg,
                                           derive_seed(seed, 3, 0));
  setup_.marker_roi_center = truth_.t_cam_from_marker.front().apply(mb.center());
  setup_.marker_roi_radius = mb.half_diagonal() + 10.0;
  setup_.marker_rotation_hint = perturbed_rotation(truth_.t_cam_from_marker.front().rotation,
                                          scenario.operator_hint_error_deg, derive_seed(seed, 3, 1));
  setup_.n_frames = n;
  for (int k = 0; k < n; ++k) {
    setup_.heldout.push_back(scenario.heldout_every > 0 && k % scenario.heldout_every == scenario.heldout_every - 1);
  }
}

SessionFrame SimulatedSession::frame(int k) const {
  if (k < 0 || k >= setup_.n_frames) throw Error(ErrorKind::InvalidArgument, "frame index out of range");
  const auto ku = static_cast<std::size_t>(k);
  SessionFrame f;
  f.index = k;

  const RigidTransform t_world_from_marker =
      compose(invert(t_cam_from_world_), truth_.t_cam_from_marker[ku]);
  const TriangleMesh scene = merge(phantom_world_, transformed(marker_mesh_, t_world_from_marker));
  f.depth = render_depth(scene, t_cam_from_world_, scenario_.camera, scenario_.depth_noise,
                         derive_seed(seed_, 1, ku));

  std::vector<UsSpot> spots;
  try {
    for (const auto& hit : intersect_wires(wires_, invert(t_phantom_from_image_[ku]), scenario_.image)) {
      if (hit.status == HitStatus::InField) spots.push_back({hit.pixel, hit.wire.index()});
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateIntersection) throw;
  }
  f.us = render_us_frame(spots, scenario_.image, scenario_.psf_sigma_px, scenario_.speckle,
                         derive_seed(seed_, 2, ku), k);
  return f;
}

CalibrationOutcome process_session(const SessionSetup& setup, const FrameProvider& frames,
                                   const ProcessingParams& params) {
  if (setup.n_frames <= 0) throw Error(ErrorKind::ConfigError, "session has no frames");
  const NWireGeometry wires = make_nwire_geometry(setup.phantom);
  CalibrationOutcome out;

  const SessionFrame first = frames(0);
  const PointCloud cloud0 = to_point_cloud(first.depth);

  const TriangleMesh phantom_mesh = make_phantom_mesh(setup.phantom);
  const RegistrationResult phantom = localize_model(phantom_mesh, cloud0, setup.phantom_roi_center,
                                                    setup.phantom_roi_radius, params.icp,
                                                    {setup.phantom_rotation_hint, true});
  const TrackerState phantom_state = start_tracker(phantom_mesh, phantom, params.icp, true);
  out.t_cam_from_phantom = phantom_state.last_pose;
  out.phantom_ambiguous = phantom.ambiguous;

  IcpParams marker_icp = params.icp;
  marker_icp.model_downsample_spacing = setup.marker.downsample_spacing;
  const TriangleMesh marker_mesh = make_marker_mesh(setup.marker);
  const RegistrationResult marker = localize_model(marker_mesh, cloud0, setup.marker_roi_center,
                                                   setup.marker_roi_radius, marker_icp,
                                                   {setup.marker_rotation_hint, true});
  out.marker_ambiguous = marker.ambiguous;
  TrackerState tracker = start_tracker(marker_mesh, marker, marker_icp);

  std::vector<Correspondence> corrs;
  std::vector<HeldOutFrame> heldout;
  std::vector<Mat3> calib_rotations;
  for (int k = 0; k < setup.n_frames; ++k) {
    const SessionFrame f = k == 0 ? first : frames(k);
    TrackedPose tp{k, tracker.last_pose, marker.rms_residue, false};
    if (k > 0) {
      auto [next, result] = track_step(std::move(tracker), to_point_cloud(f.depth), marker_icp);
      tracker = std::move(next);
      tp = {k, tracker.last_pose, result.rms_residue, tracker.lost};
    }
    out.poses.push_back(tp);
    if (tp.lost) {
      spdlog::warn("frame {}: marker tracking lost, frame dropped", k);
      ++out.n_frames_dropped;
      continue;
    }

    LabeledSpots labeled;
    try {
      labeled = match_nwires(segment_spots(f.us, params.segmentation), params.match);
    } catch (const Error& e) {
      spdlog::warn("frame {}: {}, frame dropped", k, e.what());
      ++out.n_frames_dropped;
      continue;
    }
    const bool is_heldout = static_cast<std::size_t>(k) < setup.heldout.size() &&
                            setup.heldout[static_cast<std::size_t>(k)];
    if (is_heldout) {
      heldout.push_back({f.us, tp.t_cam_from_marker});
    } else {
      const auto c = build_correspondences(labeled, wires, out.t_cam_from_phantom, tp.t_cam_from_marker, k);
      corrs.insert(corrs.end(), c.begin(), c.end());
      calib_rotations.push_back(tp.t_cam_from_marker.rotation);
    }
  }

  if (static_cast<int>(calib_rotations.size()) < kMinCalibrationFrames) {
    spdlog::warn("only {} calibration frames; at least {} are recommended", calib_rotations.size(),
                 kMinCalibrationFrames);
  }
  double spread = 0.0;
  for (std::size_t i = 0; i < calib_rotations.size(); ++i) {
    for (std::size_t j = i + 1; j < calib_rotations.size(); ++j) {
      spread = std::max(spread, rotation_angle(calib_rotations[i].transpose() * calib_rotations[j]));
    }
  }
  if (rad2deg(spread) < kMinOrientationSpreadDeg) {
    spdlog::warn("probe orientations span only {:.1f} deg; at least {:.0f} deg are recommended",
                 rad2deg(spread), kMinOrientationSpreadDeg);
  }

  CalibrationReport& report = out.report;
  report.matrix = solve_calibration(corrs);
  report.rms_fit = fit_rms(report.matrix, corrs);
  report.n_frames = static_cast<int>(calib_rotations.size());
  report.n_correspondences = static_cast<int>(corrs.size());
  out.n_heldout = static_cast<int>(heldout.size());
  if (!heldout.empty()) {
    ErrorOptions opts;
    opts.segmentation = params.segmentation;
    opts.match = params.match;
    const auto stats = calibration_error(report.matrix, heldout, wires, out.t_cam_from_phantom, opts);
    report.error_mean = stats.mean;
    report.error_sd = stats.sd;
  }
  return out;
}

std::vector<TrackedPose> track_marker(const SessionSetup& setup, const FrameProvider& frames,
                                      const IcpParams& icp) {
  if (setup.n_frames <= 0) throw Error(ErrorKind::ConfigError, "session has no frames");
  IcpParams marker_icp = icp;
  marker_icp.model_downsample_spacing = setup.marker.downsample_spacing;
  const TriangleMesh marker_mesh = make_marker_mesh(setup.marker);
  const RegistrationResult marker =
      localize_model(marker_mesh, to_point_cloud(frames(0).depth), setup.marker_roi_center,
                     setup.marker_roi_radius, marker_icp, {setup.marker_rotation_hint, true});
  TrackerState tracker = start_tracker(marker_mesh, marker, marker_icp);
  std::vector<TrackedPose> poses{{0, marker.pose, marker.rms_residue, false}};
  for (int k = 1; k < setup.n_frames; ++k) {
    auto [next, result] = track_step(std::move(tracker), to_point_cloud(frames(k).depth), marker_icp);
    tracker = std::move(next);
    if (tracker.lost) spdlog::warn("frame {}: marker tracking lost", k);
    poses.push_back({k, tracker.last_pose, result.rms_residue, tracker.lost});
  }
  return poses;
}

CalibrationAccuracy compare_calibration(const CalibrationMatrix& truth, const CalibrationMatrix& estimate) {
  CalibrationAccuracy acc;
  acc.translation_mm = (truth.translation - estimate.translation).norm();
  acc.rotation_deg = rad2deg(rotation_angle(truth.rotation.transpose() * estimate.rotation));
  acc.scale_rel = std::max(std::abs(estimate.sx / truth.sx - 1.0), std::abs(estimate.sy / truth.sy - 1.0));
  return acc;
}

}  // namespace uscal
