#include <doctest.h>

#include <map>
#include <utility>

#include "support.hpp"
#include "uscal/error.hpp"
#include "uscal/scene.hpp"

using namespace uscal;
using uscal::test::Gen;

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

// Every undirected edge must be used exactly twice, once in each direction.
bool watertight(const TriangleMesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) ++directed[{t[i], t[(i + 1) % 3]}];
  }
  for (const auto& [edge, n] : directed) {
    if (n != 1) return false;
    const auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

double signed_volume(const TriangleMesh& mesh) {
  double v = 0.0;
  for (const auto& t : mesh.triangles) {
    v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]])) / 6.0;
  }
  return v;
}

}  // namespace

TEST_CASE("default N-wire geometry") {
  const NWireParams p;
  const NWireGeometry g = make_nwire_geometry(p);
  CHECK_NOTHROW(g.validate());
  for (int l = 0; l < 3; ++l) {
    const NWireLayer& layer = g.layers[l];
    const double z = p.layer_depths[l];
    for (const Segment* s : {&layer.front, &layer.back, &layer.diagonal}) {
      CHECK(s->a.z() == z);
      CHECK(s->b.z() == z);
    }
    CHECK(layer.front.a.y() == p.y_front);
    CHECK(layer.back.a.y() == p.y_back);
    // Diagonal endpoints sit on the two side wires.
    CHECK(std::abs(layer.diagonal.a.y() - p.y_front) < 1e-9);
    CHECK(std::abs(layer.diagonal.b.y() - p.y_back) < 1e-9);
    CHECK(layer.diagonal.a.x() == doctest::Approx(0.0));
    CHECK(layer.diagonal.b.x() == doctest::Approx(p.x_span));
  }
  for (int i = 0; i < 9; ++i) {
    const WireId id = WireId::from_index(i);
    CHECK(id.index() == i);
    CHECK(g.wire(id).length() > 0.0);
  }
  CHECK(g.wire_diameter == 1.0);
}

TEST_CASE("invalid N-wire parameters") {
  NWireParams p;
  p.y_back = p.y_front;
  CHECK(kind_of([&] { make_nwire_geometry(p); }) == ErrorKind::InvalidGeometry);
  p = NWireParams{};
  p.layer_depths = {15.0};
  CHECK(kind_of([&] { make_nwire_geometry(p); }) == ErrorKind::InvalidGeometry);
  p = NWireParams{};
  p.layer_depths = {15.0, 35.0, 25.0};
  CHECK(kind_of([&] { make_nwire_geometry(p); }) == ErrorKind::InvalidGeometry);
  p = NWireParams{};
  p.x_span = 0.0;
  CHECK(kind_of([&] { make_nwire_geometry(p); }) == ErrorKind::InvalidGeometry);
}

TEST_CASE("middle point on the diagonal") {
  const NWireGeometry g = make_nwire_geometry({});
  CHECK((middle_point_on_diagonal(g, 0, 0.0) - g.layers[0].diagonal.a).norm() == 0.0);
  CHECK((middle_point_on_diagonal(g, 0, 1.0) - g.layers[0].diagonal.b).norm() < 1e-12);
  CHECK((middle_point_on_diagonal(g, 0, 0.5) - Vec3(20, 20, 15)).norm() < 1e-12);
  CHECK(kind_of([&] { middle_point_on_diagonal(g, 0, 1.1); }) == ErrorKind::AlphaOutOfRange);
  CHECK(kind_of([&] { middle_point_on_diagonal(g, 0, -0.1); }) == ErrorKind::AlphaOutOfRange);

  Gen gen(11);
  for (int i = 0; i < 1000; ++i) {
    const int layer = gen.integer(0, 2);
    const double alpha = gen.uniform(0.0, 1.0);
    const Vec3 p = middle_point_on_diagonal(g, layer, alpha);
    CHECK(point_segment_distance(p, g.layers[layer].diagonal) < 1e-12);
    // Perpendicular plane at x = alpha * x_span cuts the diagonal there.
    CHECK(p.x() == doctest::Approx(alpha * 40.0).epsilon(1e-12));
  }
}

TEST_CASE("phantom mesh is closed and valid") {
  const TriangleMesh mesh = make_phantom_mesh({});
  CHECK_NOTHROW(mesh.validate());
  CHECK(mesh.triangles.size() > 12);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    CHECK(std::abs(mesh.normal(t).norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("marker meshes") {
  MarkerParams single;
  single.arrangement = {{0, 0, 0}};
  const TriangleMesh cube = make_marker_mesh(single);
  CHECK(cube.vertices.size() == 8);
  CHECK(cube.triangles.size() == 12);
  CHECK(mesh_span(cube) == doctest::Approx(10.0));
  CHECK(watertight(cube));
  CHECK(signed_volume(cube) == doctest::Approx(1000.0));

  const MarkerParams def;
  const TriangleMesh marker = make_marker_mesh(def);
  CHECK(mesh_span(marker) >= 35.0);
  CHECK(mesh_span(marker) <= 45.0);
  CHECK(watertight(marker));
  CHECK(signed_volume(marker) == doctest::Approx(1000.0 * def.arrangement.size()));
  for (std::size_t t = 0; t < marker.triangles.size(); ++t) {
    CHECK(std::abs(marker.normal(t).norm() - 1.0) < 1e-9);
  }

  MarkerParams sym;
  sym.arrangement.clear();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) sym.arrangement.push_back({i, j, k});
  const TriangleMesh symmetric = make_marker_mesh(sym);
  CHECK(watertight(symmetric));
  CHECK(mesh_span(symmetric) == doctest::Approx(20.0));

  MarkerParams empty;
  empty.arrangement.clear();
  CHECK(kind_of([&] { make_marker_mesh(empty); }) == ErrorKind::EmptyArrangement);

  // Vertex count grows with the arrangement.
  MarkerParams line;
  line.arrangement = {{0, 0, 0}};
  std::size_t last = make_marker_mesh(line).vertices.size();
  for (int i = 1; i < 5; ++i) {
    line.arrangement.push_back({i, 0, 0});
    const std::size_t n = make_marker_mesh(line).vertices.size();
    CHECK(n > last);
    last = n;
  }
}

TEST_CASE("cube edges") {
  std::vector<int> all(12);
  for (int i = 0; i < 12; ++i) all[i] = i;
  const CubeEdgeModel full = make_cube_edges(50.0, all);
  double total = 0.0;
  for (const Segment& s : full.edges) total += s.length();
  CHECK(total == doctest::Approx(600.0));
  CHECK((full.center - Vec3(25, 25, 25)).norm() < 1e-12);

  const CubeEdgeModel def = make_cube_edges(50.0, default_cube_edge_selection());
  CHECK(def.edges.size() == 5);
  CHECK(kind_of([] { make_cube_edges(50.0, {13}); }) == ErrorKind::BadEdgeId);
  CHECK(kind_of([] { make_cube_edges(50.0, {}); }) == ErrorKind::BadEdgeId);
  CHECK(kind_of([] { make_cube_edges(50.0, {1, 1}); }) == ErrorKind::BadEdgeId);

  // Every edge joins two cube corners along one axis.
  for (int i = 0; i < 12; ++i) {
    const Segment s = cube_edge(50.0, i);
    CHECK(s.length() == doctest::Approx(50.0));
    for (const Vec3& p : {s.a, s.b}) {
      for (int k = 0; k < 3; ++k) CHECK((p[k] == 0.0 || p[k] == 50.0));
    }
  }
  const TriangleMesh mesh = make_cube_mesh(50.0);
  CHECK(watertight(mesh));
  CHECK(signed_volume(mesh) == doctest::Approx(125000.0));
}

TEST_CASE("box, bounding box and merge") {
  const TriangleMesh box = make_box(Vec3(-1, -2, -3), Vec3(1, 2, 3));
  CHECK(watertight(box));
  CHECK(signed_volume(box) == doctest::Approx(48.0));
  const Aabb bb = bounding_box(box);
  CHECK((bb.lo - Vec3(-1, -2, -3)).norm() == 0.0);
  CHECK(bb.half_diagonal() == doctest::Approx(std::sqrt(14.0)));
  CHECK(kind_of([] { bounding_box(TriangleMesh{}); }) == ErrorKind::EmptyMesh);

  const TriangleMesh two = merge(box, transformed(box, RigidTransform::from_translation(Vec3(10, 0, 0))));
  CHECK(two.triangles.size() == 2 * box.triangles.size());
  CHECK(signed_volume(two) == doctest::Approx(96.0));
  CHECK_NOTHROW(two.validate());

  TriangleMesh bad = box;
  bad.triangles.push_back({0, 1, 99});
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidGeometry);
  bad = box;
  bad.triangles.push_back({0, 0, 1});
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidGeometry);
}

TEST_CASE("closest point on triangle against a dense barycentric search") {
  Gen g(12);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = g.vec3(10), b = g.vec3(10), c = g.vec3(10);
    const Vec3 p = g.vec3(20);
    const Vec3 q = closest_point_on_triangle(p, a, b, c);
    double best = std::numeric_limits<double>::infinity();
    const int n = 200;
    for (int u = 0; u <= n; ++u) {
      for (int v = 0; v <= n - u; ++v) {
        const Vec3 x = a + (b - a) * (double(u) / n) + (c - a) * (double(v) / n);
        best = std::min(best, (x - p).norm());
      }
    }
    CHECK((q - p).norm() <= best + 1e-9);
    CHECK((q - p).norm() >= best - 0.2);
  }
}

TEST_CASE("point to segment distance") {
  const Segment s{Vec3(0, 0, 0), Vec3(10, 0, 0)};
  CHECK(point_segment_distance(Vec3(5, 3, 4), s) == doctest::Approx(5.0));
  CHECK(point_segment_distance(Vec3(-3, 4, 0), s) == doctest::Approx(5.0));
  CHECK(point_segment_distance(Vec3(13, 0, 4), s) == doctest::Approx(5.0));
  CHECK(point_segment_distance(Vec3(7, 0, 0), s) == 0.0);
}
