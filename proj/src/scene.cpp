#include "uscal/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "uscal/error.hpp"

namespace uscal {

namespace {

constexpr double kDegenerateArea = 1e-9;
constexpr double kOnLineTolerance = 1e-9;

// Unit-cube faces as corner offsets, wound so the normal points outward.
// Order: -x, +x, -y, +y, -z, +z.
constexpr std::array<std::array<LatticeOffset, 4>, 6> kCubeFaces{{
    {{{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
    {{{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
    {{{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
    {{{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
    {{{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
    {{{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
}};

constexpr std::array<LatticeOffset, 6> kFaceNeighbor{{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

double distance_to_line(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = (b - a).normalized();
  const Vec3 r = p - a;
  return (r - r.dot(d) * d).norm();
}

}  // namespace

double TriangleMesh::area(std::size_t tri) const {
  const auto& t = triangles[tri];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Vec3 TriangleMesh::normal(std::size_t tri) const {
  const auto& t = triangles[tri];
  return (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).normalized();
}

void TriangleMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    for (int idx : triangles[i]) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorKind::InvalidGeometry,
                    "triangle " + std::to_string(i) + " has an out-of-range vertex index");
      }
    }
    if (area(i) <= kDegenerateArea) {
      throw Error(ErrorKind::InvalidGeometry, "triangle " + std::to_string(i) + " is degenerate");
    }
  }
}

TriangleMesh merge(const TriangleMesh& a, const TriangleMesh& b) {
  TriangleMesh out = a;
  const int offset = static_cast<int>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (const auto& t : b.triangles) {
    out.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
  return out;
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t_out_from_in) {
  TriangleMesh out = mesh;
  for (auto& v : out.vertices) v = t_out_from_in.apply(v);
  return out;
}

TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                               (i & 4) ? hi.z() : lo.z());
  }
  for (const auto& face : kCubeFaces) {
    std::array<int, 4> ids{};
    for (int k = 0; k < 4; ++k) ids[k] = face[k][0] | (face[k][1] << 1) | (face[k][2] << 2);
    mesh.triangles.push_back({ids[0], ids[1], ids[2]});
    mesh.triangles.push_back({ids[0], ids[2], ids[3]});
  }
  return mesh;
}

Aabb bounding_box(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) throw Error(ErrorKind::EmptyMesh, "mesh has no vertices");
  Aabb b{mesh.vertices.front(), mesh.vertices.front()};
  for (const auto& v : mesh.vertices) {
    b.lo = b.lo.cwiseMin(v);
    b.hi = b.hi.cwiseMax(v);
  }
  return b;
}

double mesh_span(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) return 0.0;
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).maxCoeff();
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

Vec3 closest_point_on_segment(const Vec3& p, const Segment& s) {
  const Vec3 d = s.b - s.a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return s.a;
  const double t = std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0);
  return s.a + t * d;
}

double point_segment_distance(const Vec3& p, const Segment& s) { return (p - closest_point_on_segment(p, s)).norm(); }

WireId WireId::from_index(int index) {
  if (index < 0 || index >= 9) {
    throw Error(ErrorKind::InvalidArgument, "wire index must be in [0, 8]");
  }
  return {index / 3, static_cast<WirePosition>(index % 3)};
}

const Segment& NWireGeometry::wire(WireId id) const {
  if (id.layer < 0 || id.layer >= 3) throw Error(ErrorKind::InvalidArgument, "layer out of range");
  const auto& l = layers[static_cast<std::size_t>(id.layer)];
  switch (id.position) {
    case WirePosition::Front: return l.front;
    case WirePosition::Diagonal: return l.diagonal;
    case WirePosition::Back: return l.back;
  }
  return l.front;
}

void NWireGeometry::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    for (const Segment* s : {&l.front, &l.back, &l.diagonal}) {
      if (std::abs(s->a.z() - l.depth) > kOnLineTolerance ||
          std::abs(s->b.z() - l.depth) > kOnLineTolerance) {
        throw Error(ErrorKind::InvalidGeometry, "wire endpoints off their layer depth");
      }
      if (s->length() <= 0.0) throw Error(ErrorKind::InvalidGeometry, "zero-length wire");
    }
    if (distance_to_line(l.diagonal.a, l.front.a, l.front.b) > kOnLineTolerance ||
        distance_to_line(l.diagonal.b, l.back.a, l.back.b) > kOnLineTolerance) {
      throw Error(ErrorKind::InvalidGeometry, "diagonal does not join the side wires");
    }
    if (i > 0 && !(l.depth > layers[i - 1].depth)) {
      throw Error(ErrorKind::InvalidGeometry, "layer depths must increase");
    }
  }
  if (!(wire_diameter > 0.0)) throw Error(ErrorKind::InvalidGeometry, "wire diameter must be > 0");
}

NWireGeometry make_nwire_geometry(const NWireParams& p) {
  if (p.layer_depths.size() != 3) {
    throw Error(ErrorKind::InvalidGeometry, "exactly three layer depths are required");
  }
  if (!(p.x_span > 0.0)) throw Error(ErrorKind::InvalidGeometry, "x_span must be positive");
  if (p.y_front == p.y_back) throw Error(ErrorKind::InvalidGeometry, "y_front equals y_back");
  if (!(p.wire_diameter > 0.0)) {
    throw Error(ErrorKind::InvalidGeometry, "wire diameter must be positive");
  }
  for (std::size_t i = 1; i < p.layer_depths.size(); ++i) {
    if (!(p.layer_depths[i] > p.layer_depths[i - 1])) {
      throw Error(ErrorKind::InvalidGeometry, "layer depths must be strictly increasing");
    }
  }

  NWireGeometry g;
  g.wire_diameter = p.wire_diameter;
  for (std::size_t i = 0; i < 3; ++i) {
    const double z = p.layer_depths[i];
    auto& l = g.layers[i];
    l.depth = z;
    l.front = {{0.0, p.y_front, z}, {p.x_span, p.y_front, z}};
    l.back = {{0.0, p.y_back, z}, {p.x_span, p.y_back, z}};
    l.diagonal = {{0.0, p.y_front, z}, {p.x_span, p.y_back, z}};
  }
  g.validate();
  return g;
}

Vec3 middle_point_on_diagonal(const NWireGeometry& geom, int layer, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorKind::AlphaOutOfRange, "alpha must lie in [0, 1]");
  }
  if (layer < 0 || layer >= 3) throw Error(ErrorKind::InvalidArgument, "layer out of range");
  const Segment& d = geom.layers[static_cast<std::size_t>(layer)].diagonal;
  return d.a + alpha * (d.b - d.a);
}

TriangleMesh make_phantom_mesh(const NWireParams& p) {
  const double y_lo = std::min(p.y_front, p.y_back) - 10.0;
  const double y_hi = std::max(p.y_front, p.y_back) + 10.0;
  const double z_floor = p.layer_depths.empty() ? 40.0 : p.layer_depths.back() + 7.0;
  const double wall = 6.0;
  const double x1 = p.x_span;

  TriangleMesh mesh = make_box({-wall, y_lo, 0.0}, {0.0, y_hi, z_floor});
  mesh = merge(mesh, make_box({x1, y_lo, 0.0}, {x1 + wall, y_hi, z_floor}));
  mesh = merge(mesh, make_box({-wall, y_lo, z_floor}, {x1 + wall, y_hi, z_floor + 5.0}));
  // Mounting blocks of different sizes at opposite corners break the symmetry.
  mesh = merge(mesh, make_box({-wall, y_lo, -8.0}, {6.0, y_lo + 12.0, 0.0}));
  mesh = merge(mesh, make_box({x1 - 4.0, y_hi - 16.0, -4.0}, {x1 + wall, y_hi, 0.0}));
  return mesh;
}

std::vector<LatticeOffset> default_marker_arrangement() {
  return {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, {0, 1, 0}, {0, 2, 0}, {2, 0, 1}};
}

TriangleMesh make_marker_mesh(const MarkerParams& params) {
  if (params.arrangement.empty()) {
    throw Error(ErrorKind::EmptyArrangement, "marker arrangement is empty");
  }
  if (!(params.cube_size > 0.0)) {
    throw Error(ErrorKind::InvalidGeometry, "cube size must be positive");
  }
  const std::set<LatticeOffset> occupied(params.arrangement.begin(), params.arrangement.end());

  TriangleMesh mesh;
  std::map<LatticeOffset, int> vertex_ids;
  auto vertex = [&](const LatticeOffset& q) {
    auto [it, inserted] = vertex_ids.try_emplace(q, static_cast<int>(mesh.vertices.size()));
    if (inserted) {
      mesh.vertices.emplace_back(q[0] * params.cube_size, q[1] * params.cube_size,
                                 q[2] * params.cube_size);
    }
    return it->second;
  };

  for (const auto& cell : occupied) {
    for (std::size_t f = 0; f < 6; ++f) {
      const LatticeOffset nb{cell[0] + kFaceNeighbor[f][0], cell[1] + kFaceNeighbor[f][1],
                             cell[2] + kFaceNeighbor[f][2]};
      if (occupied.count(nb)) continue;
      std::array<int, 4> ids{};
      for (int k = 0; k < 4; ++k) {
        ids[k] = vertex({cell[0] + kCubeFaces[f][k][0], cell[1] + kCubeFaces[f][k][1],
                         cell[2] + kCubeFaces[f][k][2]});
      }
      mesh.triangles.push_back({ids[0], ids[1], ids[2]});
      mesh.triangles.push_back({ids[0], ids[2], ids[3]});
    }
  }
  return mesh;
}

std::vector<int> default_cube_edge_selection() { return {4, 5, 6, 7, 8}; }

Segment cube_edge(double s, int id) {
  const std::array<Vec3, 4> ring{Vec3(0, 0, 0), Vec3(s, 0, 0), Vec3(s, s, 0), Vec3(0, s, 0)};
  const Vec3 up(0, 0, s);
  if (id >= 0 && id < 4) return {ring[id], ring[(id + 1) % 4]};
  if (id >= 4 && id < 8) return {ring[id - 4] + up, ring[(id - 3) % 4] + up};
  if (id >= 8 && id < 12) return {ring[id - 8], ring[id - 8] + up};
  throw Error(ErrorKind::BadEdgeId, "cube edge id " + std::to_string(id) + " not in [0, 11]");
}

CubeEdgeModel make_cube_edges(double size, const std::vector<int>& edge_ids) {
  if (!(size > 0.0)) throw Error(ErrorKind::InvalidGeometry, "cube size must be positive");
  if (edge_ids.empty() || edge_ids.size() > 12) {
    throw Error(ErrorKind::BadEdgeId, "select between 1 and 12 edges");
  }
  const std::set<int> unique(edge_ids.begin(), edge_ids.end());
  if (unique.size() != edge_ids.size()) throw Error(ErrorKind::BadEdgeId, "duplicate edge id");

  CubeEdgeModel model;
  model.size = size;
  model.center = Vec3::Constant(size / 2.0);
  for (int id : edge_ids) {
    model.edges.push_back(cube_edge(size, id));
    model.edge_ids.push_back(id);
  }
  return model;
}

TriangleMesh make_cube_mesh(double size) { return make_box(Vec3::Zero(), Vec3::Constant(size)); }

}  // namespace uscal
