#pragma once

// Parametric ground-truth world: N-wire phantom, marker, evaluation cube.
//
// Phantom CS: x runs along the wires, y from the front wire to the back wire,
// z grows with depth. The origin is the front-top wire anchor, so a slice
// perpendicular to the wires is nominally the y-z plane.

#include <array>
#include <vector>

#include "uscal/geom.hpp"

namespace uscal {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  [[nodiscard]] bool empty() const { return triangles.empty(); }
  [[nodiscard]] double area(std::size_t tri) const;
  /// Unit normal following the right-hand winding of the triangle.
  [[nodiscard]] Vec3 normal(std::size_t tri) const;
  /// Throws InvalidGeometry on out-of-range indices or degenerate triangles.
  void validate() const;
};

TriangleMesh merge(const TriangleMesh& a, const TriangleMesh& b);
TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t_out_from_in);
/// Axis-aligned box with outward-facing triangles.
TriangleMesh make_box(const Vec3& lo, const Vec3& hi);
/// Largest extent of the axis-aligned bounding box.
double mesh_span(const TriangleMesh& mesh);

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  [[nodiscard]] Vec3 center() const { return 0.5 * (lo + hi); }
  [[nodiscard]] double half_diagonal() const { return 0.5 * (hi - lo).norm(); }
};
/// Throws EmptyMesh when the mesh has no vertices.
Aabb bounding_box(const TriangleMesh& mesh);
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct Segment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();

  [[nodiscard]] double length() const { return (b - a).norm(); }
  [[nodiscard]] Vec3 direction() const { return (b - a).normalized(); }
};

Vec3 closest_point_on_segment(const Vec3& p, const Segment& s);
double point_segment_distance(const Vec3& p, const Segment& s);

// --- N-wire phantom ---------------------------------------------------------

enum class WirePosition { Front = 0, Diagonal = 1, Back = 2 };

/// Identifies one of the nine wires; index() = 3 * layer + position.
struct WireId {
  int layer = 0;
  WirePosition position = WirePosition::Front;

  [[nodiscard]] int index() const { return 3 * layer + static_cast<int>(position); }
  static WireId from_index(int index);
  friend bool operator==(const WireId&, const WireId&) = default;
};

struct NWireLayer {
  double depth = 0.0;
  Segment front;
  Segment back;
  /// Runs from the front-wire endpoint to the back-wire endpoint.
  Segment diagonal;
};

struct NWireGeometry {
  std::array<NWireLayer, 3> layers;
  double wire_diameter = 1.0;

  [[nodiscard]] const Segment& wire(WireId id) const;
  void validate() const;
};

struct NWireParams {
  double x_span = 40.0;
  double y_front = 10.0;
  double y_back = 30.0;
  std::vector<double> layer_depths{15.0, 25.0, 35.0};
  double wire_diameter = 1.0;
};

NWireGeometry make_nwire_geometry(const NWireParams& params);

/// Point at fraction `alpha` along the diagonal of `layer`, starting at the
/// front-wire end. Throws AlphaOutOfRange outside [0, 1].
Vec3 middle_point_on_diagonal(const NWireGeometry& geom, int layer, double alpha);

/// Frame holding the wires: side walls at both wire anchors, a base plate and
/// two asymmetric mounting blocks so the model has a unique registration.
TriangleMesh make_phantom_mesh(const NWireParams& params);

// --- Marker -----------------------------------------------------------------

using LatticeOffset = std::array<int, 3>;

/// Seven-cube arrangement with a 40 mm span and no rotational symmetry.
std::vector<LatticeOffset> default_marker_arrangement();

struct MarkerParams {
  double cube_size = 10.0;
  std::vector<LatticeOffset> arrangement = default_marker_arrangement();
  double downsample_spacing = 3.0;
};

/// Watertight surface of the union of lattice cubes. Faces shared by two
/// occupied cells are dropped and lattice vertices are shared. A symmetric
/// arrangement is accepted but makes registration ambiguous.
TriangleMesh make_marker_mesh(const MarkerParams& params);

// --- Evaluation cube --------------------------------------------------------

/// Cube CS: origin at a corner, cube spans [0, size]^3, z up.
/// Edge ids: 0-3 bottom ring, 4-7 top ring, 8-11 verticals.
struct CubeEdgeModel {
  double size = 50.0;
  std::vector<int> edge_ids;
  std::vector<Segment> edges;
  Vec3 center = Vec3::Zero();
};

/// Four top edges plus the vertical edge at the origin corner.
std::vector<int> default_cube_edge_selection();
Segment cube_edge(double size, int edge_id);
CubeEdgeModel make_cube_edges(double size, const std::vector<int>& edge_ids);
TriangleMesh make_cube_mesh(double size);

}  // namespace uscal
