#pragma once

// N-wire probe calibration: spot segmentation, N-pattern matching,
// middle-wire correspondences and the image-to-marker least-squares fit.

#include <array>
#include <span>
#include <vector>

#include "uscal/geom.hpp"
#include "uscal/scene.hpp"
#include "uscal/ussim.hpp"

namespace uscal {

/// Affine map from a homogeneous pixel [u, v, 1] to marker-CS millimeters:
///   A = [sx * R e1 | sy * R e2 | t].
/// R and t form T_marker_from_image for the millimeter image frame.
struct CalibrationMatrix {
  Mat3 a = Mat3::Identity();
  double sx = 1.0;
  double sy = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static CalibrationMatrix from_decomposition(double sx, double sy,
                                              const RigidTransform& t_marker_from_image);
  /// Decomposes an arbitrary 3x3 affine map: scales from the column norms,
  /// rotation by polar projection of [c1/sx, c2/sy, c1 x c2 / (sx sy)]. The
  /// stored `a` is rebuilt from the decomposition.
  static CalibrationMatrix from_affine(const Mat3& a);

  [[nodiscard]] Vec3 to_marker(const Vec2& pixel) const { return a * Vec3(pixel.x(), pixel.y(), 1.0); }
  [[nodiscard]] RigidTransform marker_from_image() const { return {rotation, translation}; }
  void validate(double tol = 1e-9) const;
};

struct SegmentationParams {
  double threshold = 100.0;
  int min_blob_px = 5;
  int max_blob_px = 2000;
};

/// Threshold, 8-connected components, size filter, then intensity-weighted
/// centroids (weights are intensity above threshold). Sorted by (v, u).
std::vector<Vec2> segment_spots(const USFrame& frame, const SegmentationParams& params = {});

struct LabeledLayer {
  Vec2 front = Vec2::Zero();
  Vec2 middle = Vec2::Zero();
  Vec2 back = Vec2::Zero();
  double alpha = 0.0;  // |middle - front| / |back - front|
};

struct LabeledSpots {
  std::array<LabeledLayer, 3> layers;

  /// The nine labeled pixels, indexed like WireId::index().
  [[nodiscard]] std::array<Vec2, 9> by_wire() const;
};

struct MatchParams {
  double collinearity_tolerance_px = 3.0;
  /// The probe is held so that u grows from the front wire to the back wire.
  bool front_at_low_u = true;
};

/// Splits nine spots into three depth layers by v, orders each layer by u and
/// labels front/middle/back. Throws MatchFailed on a wrong spot count, a
/// non-collinear layer or alpha outside [0, 1].
LabeledSpots match_nwires(std::span<const Vec2> spots, const MatchParams& params = {});

struct Correspondence {
  Vec2 pixel = Vec2::Zero();
  Vec3 marker_point = Vec3::Zero();
  int frame_index = 0;
};

/// Middle-wire points mapped into the marker CS through both camera poses.
std::array<Correspondence, 3> build_correspondences(const LabeledSpots& labeled,
                                                    const NWireGeometry& geom,
                                                    const RigidTransform& t_cam_from_phantom,
                                                    const RigidTransform& t_cam_from_marker,
                                                    int frame_index = 0);

/// Least-squares calibration. A linear fit of the full affine map seeds a
/// Gauss-Newton refinement over (sx, sy, R, t), so the returned matrix is the
/// best shear-free fit. Throws TooFewCorrespondences (< 4),
/// DegeneratePixelConfiguration (collinear pixels), IllConditioned
/// (condition number of the design matrix >= 1e8).
CalibrationMatrix solve_calibration(std::span<const Correspondence> corrs);

/// Root-mean-square of ||A [u v 1] - X_marker||.
double fit_rms(const CalibrationMatrix& m, std::span<const Correspondence> corrs);

struct HeldOutFrame {
  USFrame frame;
  RigidTransform t_cam_from_marker;
};

enum class SpotSource {
  Segmented,    // segment_spots on the pixels
  Annotations,  // the simulator's ground-truth spots (oracle runs)
};

struct ErrorOptions {
  SegmentationParams segmentation;
  MatchParams match;
  SpotSource source = SpotSource::Segmented;
};

struct CalibrationErrorStats {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  int n_spots = 0;
  int n_frames = 0;
  int n_skipped = 0;
};

/// Held-out wire reprojection error: every spot goes pixel -> marker -> camera
/// -> phantom and is scored by its distance to its wire segment. Frames that
/// fail segmentation or matching are skipped with a warning; throws
/// MatchFailed when no frame is usable.
CalibrationErrorStats calibration_error(const CalibrationMatrix& matrix,
                                        std::span<const HeldOutFrame> heldout,
                                        const NWireGeometry& geom,
                                        const RigidTransform& t_cam_from_phantom,
                                        const ErrorOptions& options = {});

struct CalibrationReport {
  CalibrationMatrix matrix;
  double rms_fit = 0.0;
  int n_frames = 0;
  int n_correspondences = 0;
  double error_mean = 0.0;
  double error_sd = 0.0;
};

}  // namespace uscal
