#include "uscal/ussim.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "uscal/error.hpp"

namespace uscal {

namespace {

const double kMinPlaneAngleSin = std::sin(deg2rad(1.0));

struct PlaneCut {
  double s = 0.0;  // parameter along the segment, 0 at a and 1 at b
  Vec3 point;
};

// Intersection of the line through `seg` with the image plane z = 0.
std::optional<PlaneCut> cut(const Segment& seg, const RigidTransform& t_image_from_obj) {
  const Vec3 a = t_image_from_obj.apply(seg.a);
  const Vec3 b = t_image_from_obj.apply(seg.b);
  const Vec3 d = b - a;
  if (std::abs(d.z()) < kMinPlaneAngleSin * d.norm()) return std::nullopt;
  const double s = -a.z() / d.z();
  return PlaneCut{s, seg.a + s * (seg.b - seg.a)};
}

Vec2 to_pixel(const Vec3& p_obj, const RigidTransform& t_image_from_obj, const ImageGeometry& im) {
  const Vec3 q = t_image_from_obj.apply(p_obj);
  return {q.x() / im.sx, q.y() / im.sy};
}

}  // namespace

void ImageGeometry::validate() const {
  if (!(sx > 0.0) || !(sy > 0.0)) throw Error(ErrorKind::InvalidArgument, "pixel spacing must be > 0");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "image size must be > 0");
}

std::vector<WireHit> intersect_wires(const NWireGeometry& geom,
                                     const RigidTransform& t_image_from_phantom,
                                     const ImageGeometry& image) {
  image.validate();
  std::vector<WireHit> hits;
  hits.reserve(9);
  for (int i = 0; i < 9; ++i) {
    const WireId id = WireId::from_index(i);
    const Segment& seg = geom.wire(id);
    const auto c = cut(seg, t_image_from_phantom);
    if (!c) {
      throw Error(ErrorKind::DegenerateIntersection,
                  "image plane within 1 degree of wire " + std::to_string(i));
    }
    WireHit hit;
    hit.wire = id;
    hit.point = c->point;
    hit.pixel = to_pixel(c->point, t_image_from_phantom, image);
    if (c->s < 0.0 || c->s > 1.0) {
      hit.status = HitStatus::OutOfSegment;
    } else if (!image.contains(hit.pixel)) {
      hit.status = HitStatus::OutOfImage;
    }
    hits.push_back(hit);
  }
  return hits;
}

std::vector<EdgeHit> intersect_cube_edges(const CubeEdgeModel& model,
                                          const RigidTransform& t_image_from_cube,
                                          const ImageGeometry& image) {
  image.validate();
  std::vector<EdgeHit> hits;
  for (std::size_t i = 0; i < model.edges.size(); ++i) {
    const auto c = cut(model.edges[i], t_image_from_cube);
    if (!c || c->s < 0.0 || c->s > 1.0) continue;
    const Vec2 px = to_pixel(c->point, t_image_from_cube, image);
    if (!image.contains(px)) continue;
    hits.push_back({model.edge_ids[i], px, c->point});
  }
  return hits;
}

USFrame render_us_frame(const std::vector<UsSpot>& spots, const ImageGeometry& image,
                        double psf_sigma, const SpeckleParams& speckle, std::uint64_t seed,
                        int frame_index) {
  image.validate();
  if (!(psf_sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "psf_sigma must be positive");

  USFrame frame;
  frame.width = image.width;
  frame.height = image.height;
  frame.sx = image.sx;
  frame.sy = image.sy;
  frame.frame_index = frame_index;
  frame.annotations = spots;

  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  std::vector<double> blob(n, 0.0);
  const double inv2s2 = 1.0 / (2.0 * psf_sigma * psf_sigma);
  const int reach = static_cast<int>(std::ceil(5.0 * psf_sigma));
  for (const auto& s : spots) {
    const int uc = static_cast<int>(std::lround(s.pixel.x()));
    const int vc = static_cast<int>(std::lround(s.pixel.y()));
    for (int v = std::max(0, vc - reach); v <= std::min(image.height - 1, vc + reach); ++v) {
      for (int u = std::max(0, uc - reach); u <= std::min(image.width - 1, uc + reach); ++u) {
        const double du = u - s.pixel.x();
        const double dv = v - s.pixel.y();
        blob[static_cast<std::size_t>(v) * image.width + u] +=
            255.0 * std::exp(-(du * du + dv * dv) * inv2s2);
      }
    }
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(frame_index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const bool textured = speckle.mean > 0.0 || speckle.sigma > 0.0;
  const double half_width = std::sqrt(3.0) * speckle.sigma;

  frame.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double bg = 0.0;
    if (textured) bg = std::max(0.0, speckle.mean + half_width * unif(rng));
    frame.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(blob[i] + bg), 0L, 255L));
  }
  return frame;
}

}  // namespace uscal
