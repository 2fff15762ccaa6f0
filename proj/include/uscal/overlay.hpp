#pragma once

// Software AR compositing of a calibrated ultrasound frame into a color frame.

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "uscal/calib.hpp"
#include "uscal/depthsim.hpp"
#include "uscal/geom.hpp"
#include "uscal/ussim.hpp"

namespace uscal {

struct RgbFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triplets

  RgbFrame() = default;
  RgbFrame(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  [[nodiscard]] const std::uint8_t* at(int u, int v) const {
    return &pixels[(static_cast<std::size_t>(v) * width + u) * 3];
  }
  std::uint8_t* at(int u, int v) { return &pixels[(static_cast<std::size_t>(v) * width + u) * 3]; }
};

using Quad = std::array<Vec2, 4>;

/// Color-image pixels of the ultrasound corners (0,0), (W,0), (W,H), (0,H)
/// taken through the calibration, the marker pose and the intrinsics.
/// Throws BehindCamera when a corner has z <= 0.
Quad image_quad(const CalibrationMatrix& matrix, const RigidTransform& t_cam_from_marker,
                const CameraIntrinsics& k, int us_width, int us_height);

using Colormap = std::array<std::array<std::uint8_t, 3>, 256>;

/// "hot" (black, red, yellow) or "gray". Throws InvalidArgument otherwise.
const Colormap& colormap(std::string_view name);

/// Maps ultrasound pixel coordinates onto the quad (corners in image_quad order).
Mat3 quad_homography(const Quad& quad, int us_width, int us_height);

/// Inverse-homography nearest-neighbor warp of the ultrasound frame over the
/// quad, colored and alpha-blended. Only pixels inside the quad (and the
/// frame) change. Throws DegenerateQuad for collinear or non-convex quads.
RgbFrame composite(const RgbFrame& rgb, const USFrame& us, const Quad& quad,
                   std::string_view colormap_name = "hot", double opacity = 0.85);

/// Gray rendering of a depth map (near = bright, no return = black), a
/// stand-in color frame for the simulated sessions.
RgbFrame shade_depth(const DepthMap& depth);

}  // namespace uscal
