#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "quadfit/errors.hpp"
#include "quadfit/mesh.hpp"
#include "quadfit/synth.hpp"
#include "support.hpp"

using namespace quadfit;

namespace {

QuadMesh unit_quad() {
  QuadMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.quads = {{0, 1, 2, 3}};
  m.labels = {Component::wall};
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

// Neighbours by scanning every pair of vertices against every quad edge.
std::vector<std::set<int>> brute_neighbors(const QuadMesh& m) {
  const int n = static_cast<int>(m.vertices.size());
  std::vector<std::set<int>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (const Quad& q : m.quads) {
        for (int k = 0; k < 4; ++k) {
          const int a = q[k], b = q[(k + 1) % 4];
          if ((a == i && b == j) || (a == j && b == i)) out[static_cast<std::size_t>(i)].insert(j);
        }
      }
    }
  }
  return out;
}

std::map<std::pair<int, int>, int> edge_use(const QuadMesh& m) {
  std::map<std::pair<int, int>, int> use;
  for (const Quad& q : m.quads) {
    for (int k = 0; k < 4; ++k) {
      const int a = q[k], b = q[(k + 1) % 4];
      ++use[{std::min(a, b), std::max(a, b)}];
    }
  }
  return use;
}

}  // namespace

TEST_CASE("2x2 grid validates cleanly") {
  const QuadMesh g = make_grid(3, 3);
  CHECK(g.quads.size() == 4);
  CHECK(validate(g).ok());
}

TEST_CASE("reversed winding of one quad is an orientation violation") {
  QuadMesh g = make_grid(3, 3);
  std::reverse(g.quads[0].begin(), g.quads[0].end());
  const auto r = validate(g);
  const auto n = r.count(ViolationKind::orientation);
  CHECK(n >= 1);
  CHECK(n <= 2);
}

TEST_CASE("index equal to the vertex count is out of range") {
  QuadMesh g = make_grid(3, 3);
  g.quads[3][2] = static_cast<int>(g.vertices.size());
  CHECK(validate(g).count(ViolationKind::index_range) >= 1);
}

TEST_CASE("other invariant violations are reported as data") {
  SUBCASE("repeated vertex") {
    QuadMesh g = make_grid(3, 3);
    g.quads[0][1] = g.quads[0][0];
    CHECK(validate(g).count(ViolationKind::repeated_vertex) >= 1);
  }
  SUBCASE("edge shared by three quads") {
    QuadMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {1, -1, 0}, {0, -1, 0}, {0.5, 0, 1}, {0.5, 0, 2}};
    m.quads = {{0, 1, 2, 3}, {1, 0, 5, 4}, {0, 1, 7, 6}};
    m.labels.assign(3, Component::wall);
    CHECK(validate(m).count(ViolationKind::non_manifold_edge) >= 1);
    CHECK_THROWS_AS(extract_boundary_loops(m), TopologyError);
  }
  SUBCASE("landmark out of range") {
    QuadMesh g = make_grid(3, 3);
    g.landmarks["H0"] = 99;
    CHECK(validate(g).count(ViolationKind::landmark) == 1);
  }
  SUBCASE("loops must cover the boundary") {
    QuadMesh g = make_grid(3, 3);
    g.boundary_loops.clear();
    CHECK(validate(g).count(ViolationKind::boundary_loop) >= 1);
  }
  SUBCASE("non-finite coordinate") {
    QuadMesh g = make_grid(3, 3);
    g.vertices[4].x() = std::nan("");
    CHECK(validate(g).count(ViolationKind::non_finite) >= 1);
  }
  SUBCASE("label count") {
    QuadMesh g = make_grid(3, 3);
    g.labels.pop_back();
    CHECK(validate(g).count(ViolationKind::label) >= 1);
  }
}

TEST_CASE("triangle surface validation") {
  TriSurface s;
  s.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  s.triangles = {{0, 1, 2}};
  CHECK(validate(s).ok());
  s.triangles.push_back({0, 1, 3});  // collinear
  CHECK(validate(s).count(ViolationKind::degenerate_triangle) == 1);
  s.triangles.pop_back();
  s.vertex_normals = {{0, 0, 1}, {0, 0, 1}, {0, 0, 1.1}, {0, 0, 1}};
  CHECK(validate(s).count(ViolationKind::normal_length) == 1);
  s.triangles.push_back({0, 1, 4});
  CHECK(validate(s).count(ViolationKind::index_range) == 1);
}

TEST_CASE("adjacency examples") {
  SUBCASE("single quad") {
    const auto adj = build_adjacency(unit_quad());
    for (const auto& nb : adj.neighbors) CHECK(nb.size() == 2);
    for (bool b : adj.boundary) CHECK(b);
  }
  SUBCASE("3x3 grid") {
    const auto adj = build_adjacency(make_grid(3, 3));
    CHECK(adj.neighbors[4].size() == 4);
    for (int c : {0, 2, 6, 8}) CHECK(adj.neighbors[static_cast<std::size_t>(c)].size() == 2);
    CHECK_FALSE(adj.boundary[4]);
  }
  SUBCASE("tube rings") {
    const QuadMesh t = make_tube(4, 4);
    const auto adj = build_adjacency(t);
    for (std::size_t i = 4; i < 16; ++i) CHECK(adj.neighbors[i].size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(adj.neighbors[i].size() == 3);
  }
  SUBCASE("invalid mesh is rejected") {
    QuadMesh g = make_grid(3, 3);
    g.quads[0][0] = 100;
    CHECK_THROWS_AS(build_adjacency(g), ValidationError);
  }
}

TEST_CASE("adjacency is symmetric and matches brute force") {
  std::vector<QuadMesh> meshes = {make_grid(5, 4), make_tube(6, 3), make_grid(2, 2)};
  TemplateSpec small;
  small.circumferential = 12;
  small.axial = 6;
  meshes.push_back(gen_template(small));
  for (const QuadMesh& m : meshes) {
    REQUIRE(m.vertices.size() <= 200);
    const auto adj = build_adjacency(m);
    const auto brute = brute_neighbors(m);
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      const std::set<int> got(adj.neighbors[i].begin(), adj.neighbors[i].end());
      CHECK(got == brute[i]);
      CHECK(got.size() == adj.neighbors[i].size());
      for (int j : adj.neighbors[i]) {
        const auto& back = adj.neighbors[static_cast<std::size_t>(j)];
        CHECK(std::find(back.begin(), back.end(), static_cast<int>(i)) != back.end());
      }
    }
    const auto use = edge_use(m);
    std::vector<bool> bd(m.vertices.size(), false);
    for (const auto& [e, c] : use) {
      if (c == 1) bd[static_cast<std::size_t>(e.first)] = bd[static_cast<std::size_t>(e.second)] = true;
    }
    CHECK(adj.boundary == bd);
  }
}

TEST_CASE("boundary loop examples") {
  SUBCASE("single quad gives one 4-cycle") {
    const auto loops = extract_boundary_loops(unit_quad());
    REQUIRE(loops.size() == 1);
    CHECK(loops[0].closed);
    CHECK(loops[0].vertices == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("open tube has two rings") {
    const auto loops = extract_boundary_loops(make_tube(7, 3));
    REQUIRE(loops.size() == 2);
    for (const auto& l : loops) {
      CHECK(l.closed);
      CHECK(l.vertices.size() == 7);
    }
  }
  SUBCASE("3x3 grid has one 8-loop") {
    const auto loops = extract_boundary_loops(make_grid(3, 3));
    REQUIRE(loops.size() == 1);
    CHECK(loops[0].vertices.size() == 8);
  }
}

TEST_CASE("boundary loops partition the boundary edges and follow quad winding") {
  TemplateSpec spec;
  for (const QuadMesh& m : {make_grid(6, 3), make_tube(9, 2), gen_template(spec)}) {
    const auto loops = extract_boundary_loops(m);
    std::set<std::pair<int, int>> directed;
    for (const Quad& q : m.quads) {
      for (int k = 0; k < 4; ++k) directed.insert({q[k], q[(k + 1) % 4]});
    }
    std::multiset<std::pair<int, int>> covered;
    for (const auto& l : loops) {
      const std::size_t n = l.vertices.size();
      for (std::size_t k = 0; k + 1 < n + (l.closed ? 1 : 0); ++k) {
        const int a = l.vertices[k], b = l.vertices[(k + 1) % n];
        CHECK(directed.count({a, b}) == 1);
        covered.insert({std::min(a, b), std::max(a, b)});
      }
    }
    std::multiset<std::pair<int, int>> expected;
    for (const auto& [e, c] : edge_use(m)) {
      if (c == 1) expected.insert(e);
    }
    CHECK(covered == expected);
    const auto be = boundary_edges(m.quads);
    CHECK(be.size() == expected.size());
  }
}

TEST_CASE("template validates and single index corruptions are caught") {
  const QuadMesh t = gen_template({});
  CHECK(validate(t).ok());
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    QuadMesh bad = t;
    std::uniform_int_distribution<std::size_t> qd(0, bad.quads.size() - 1);
    std::uniform_int_distribution<int> kd(0, 3);
    std::uniform_int_distribution<int> vd(0, static_cast<int>(bad.vertices.size()) + 5);
    Quad& q = bad.quads[qd(rng)];
    const int k = kd(rng);
    int v = vd(rng);
    while (v == q[k]) v = vd(rng);
    q[k] = v;
    CHECK_FALSE(validate(bad).ok());
  }
}

TEST_CASE("normals, triangulation and helpers") {
  const QuadMesh tube = make_tube(8, 2, 2.0, 1.0);
  for (const Quad& q : tube.quads) {
    const Vec3 a = tube.vertices[q[0]], b = tube.vertices[q[1]], c = tube.vertices[q[2]], d = tube.vertices[q[3]];
    const Vec3 n = quad_normal(a, b, c, d);
    CHECK(n.norm() == doctest::Approx(1.0));
    Vec3 radial = 0.25 * (a + b + c + d);
    radial.z() = 0.0;
    CHECK(n.dot(radial) > 0.0);
  }
  const auto tris = triangulate(tube.quads);
  REQUIRE(tris.size() == 2 * tube.quads.size());
  CHECK(tris[0] == Tri{tube.quads[0][0], tube.quads[0][1], tube.quads[0][2]});
  CHECK(tris[1] == Tri{tube.quads[0][0], tube.quads[0][2], tube.quads[0][3]});
  for (const Vec3& n : vertex_normals(tube.vertices, tris)) CHECK(n.norm() == doctest::Approx(1.0));

  const QuadMesh g = make_grid(3, 2, 2.0);
  CHECK(mean_edge_length(g.vertices, g.quads) == doctest::Approx(2.0));
  CHECK(referenced_vertices(g).size() == 6);
  CHECK(component_vertices(g, Component::wall).size() == 6);
  CHECK(component_vertices(g, Component::leaflet0).empty());
  CHECK(quad_normal(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()) == Vec3::Zero());

  QuadMesh moved = g;
  moved.vertices[0].x() += 1.0;
  CHECK(same_topology(g, moved));
  moved.labels[0] = Component::leaflet1;
  CHECK_FALSE(same_topology(g, moved));
}

TEST_CASE("component names round trip") {
  for (Component c : kComponents) CHECK(parse_component(component_name(c)) == c);
  CHECK_FALSE(parse_component("aorta").has_value());
}
