#pragma once

// Synthetic ultrasound: cuts the image plane with phantom wires or cube edges
// and renders 8-bit B-mode-like frames.
//
// Image CS: origin at the top-left pixel center, u to the right, v down; a
// pixel (u, v) sits at (u * sx, v * sy, 0) mm in the image frame.

#include <cstdint>
#include <vector>

#include "uscal/geom.hpp"
#include "uscal/scene.hpp"

namespace uscal {

struct ImageGeometry {
  double sx = 0.1;  // mm per pixel along u
  double sy = 0.1;  // mm per pixel along v
  int width = 512;
  int height = 512;

  [[nodiscard]] Vec3 to_image_mm(const Vec2& pixel) const { return {pixel.x() * sx, pixel.y() * sy, 0.0}; }
  [[nodiscard]] bool contains(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width - 1 && pixel.y() <= height - 1;
  }
  void validate() const;
};

/// Ground-truth spot: pixel location plus the wire index (0-8) or cube edge id.
struct UsSpot {
  Vec2 pixel = Vec2::Zero();
  int id = 0;
};

struct USFrame {
  int width = 0;
  int height = 0;
  double sx = 0.1;
  double sy = 0.1;
  int frame_index = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  std::vector<UsSpot> annotations;

  [[nodiscard]] std::uint8_t at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
};

enum class HitStatus { InField, OutOfSegment, OutOfImage };

struct WireHit {
  WireId wire;
  Vec2 pixel = Vec2::Zero();
  Vec3 point = Vec3::Zero();  // intersection in phantom CS
  HitStatus status = HitStatus::InField;
};

/// Intersections of the nine (infinite) wire lines with the image plane.
/// Throws DegenerateIntersection when any wire is within 1 degree of the
/// plane; out-of-segment and out-of-image hits are flagged, not dropped.
std::vector<WireHit> intersect_wires(const NWireGeometry& geom,
                                     const RigidTransform& t_image_from_phantom,
                                     const ImageGeometry& image);

struct EdgeHit {
  int edge_id = 0;
  Vec2 pixel = Vec2::Zero();
  Vec3 point = Vec3::Zero();  // cube CS
};

/// In-field intersections of the cube edges with the image plane. Edges
/// within 1 degree of the plane cannot produce a point echo and are skipped.
std::vector<EdgeHit> intersect_cube_edges(const CubeEdgeModel& model,
                                          const RigidTransform& t_image_from_cube,
                                          const ImageGeometry& image);

struct SpeckleParams {
  double mean = 20.0;
  double sigma = 10.0;

  static SpeckleParams none() { return {0.0, 0.0}; }
};

/// Gaussian blobs (peak 255, std `psf_sigma` px) over a background of
/// mean * m with m uniform, E[m] = 1, sd(mean * m) = sigma. Deterministic in
/// `seed`; the spots become the frame annotations.
USFrame render_us_frame(const std::vector<UsSpot>& spots, const ImageGeometry& image,
                        double psf_sigma, const SpeckleParams& speckle, std::uint64_t seed,
                        int frame_index = 0);

}  // namespace uscal
