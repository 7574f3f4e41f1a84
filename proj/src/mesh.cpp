#include "quadfit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "quadfit/errors.hpp"

namespace quadfit {

namespace {

struct DirectedEdge {
  int lo, hi;      // undirected key
  int from, to;    // direction within the owning quad
  int quad;
};

bool quad_in_range(const Quad& q, std::size_t n) {
  return std::all_of(q.begin(), q.end(),
                     [n](int v) { return v >= 0 && static_cast<std::size_t>(v) < n; });
}

bool quad_has_repeat(const Quad& q) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (q[i] == q[j]) return true;
  return false;
}

// Edges of all well-formed quads, sorted by undirected key then quad.
std::vector<DirectedEdge> collect_edges(std::size_t n, std::span<const Quad> quads) {
  std::vector<DirectedEdge> edges;
  edges.reserve(quads.size() * 4);
  for (std::size_t f = 0; f < quads.size(); ++f) {
    const Quad& q = quads[f];
    if (!quad_in_range(q, n) || quad_has_repeat(q)) continue;
    for (int k = 0; k < 4; ++k) {
      int a = q[k], b = q[(k + 1) % 4];
      edges.push_back({std::min(a, b), std::max(a, b), a, b, static_cast<int>(f)});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const DirectedEdge& x, const DirectedEdge& y) {
    if (x.lo != y.lo) return x.lo < y.lo;
    if (x.hi != y.hi) return x.hi < y.hi;
    return x.quad < y.quad;
  });
  return edges;
}

template <typename Fn>
void for_each_edge_group(const std::vector<DirectedEdge>& edges, Fn&& fn) {
  std::size_t i = 0;
  while (i < edges.size()) {
    std::size_t j = i + 1;
    while (j < edges.size() && edges[j].lo == edges[i].lo && edges[j].hi == edges[i].hi) ++j;
    fn(std::span<const DirectedEdge>(edges.data() + i, j - i));
    i = j;
  }
}

std::string edge_str(int a, int b) {
  return "(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

}  // namespace

std::string_view component_name(Component c) {
  switch (c) {
    case Component::wall: return "wall";
    case Component::leaflet0: return "leaflet0";
    case Component::leaflet1: return "leaflet1";
    case Component::leaflet2: return "leaflet2";
  }
  return "wall";
}

std::optional<Component> parse_component(std::string_view name) {
  for (Component c : kComponents) {
    if (component_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::index_range: return "index_range";
    case ViolationKind::repeated_vertex: return "repeated_vertex";
    case ViolationKind::non_manifold_edge: return "non_manifold_edge";
    case ViolationKind::orientation: return "orientation";
    case ViolationKind::landmark: return "landmark";
    case ViolationKind::boundary_loop: return "boundary_loop";
    case ViolationKind::label: return "label";
    case ViolationKind::non_finite: return "non_finite";
    case ViolationKind::degenerate_triangle: return "degenerate_triangle";
    case ViolationKind::normal_length: return "normal_length";
  }
  return "unknown";
}

const BoundaryLoop* QuadMesh::find_loop(std::string_view name) const {
  for (const BoundaryLoop& loop : boundary_loops) {
    if (loop.name == name) return &loop;
  }
  return nullptr;
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; }));
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  const std::size_t shown = std::min<std::size_t>(violations.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) os << "; ";
    os << violation_name(violations[i].kind) << ": " << violations[i].message;
  }
  if (violations.size() > shown) os << "; ... (" << violations.size() << " total)";
  return os.str();
}

ValidationReport validate_topology(std::size_t vertex_count, std::span<const Quad> quads) {
  ValidationReport report;
  for (std::size_t f = 0; f < quads.size(); ++f) {
    const Quad& q = quads[f];
    if (!quad_in_range(q, vertex_count)) {
      report.violations.push_back({ViolationKind::index_range,
                                   "quad " + std::to_string(f) + " references a vertex outside [0, " +
                                       std::to_string(vertex_count) + ")"});
    } else if (quad_has_repeat(q)) {
      report.violations.push_back(
          {ViolationKind::repeated_vertex, "quad " + std::to_string(f) + " repeats a vertex"});
    }
  }
  const auto edges = collect_edges(vertex_count, quads);
  for_each_edge_group(edges, [&](std::span<const DirectedEdge> group) {
    if (group.size() > 2) {
      report.violations.push_back({ViolationKind::non_manifold_edge,
                                   "edge " + edge_str(group[0].lo, group[0].hi) + " is shared by " +
                                       std::to_string(group.size()) + " quads"});
    } else if (group.size() == 2 && group[0].from == group[1].from) {
      report.violations.push_back({ViolationKind::orientation,
                                   "edge " + edge_str(group[0].lo, group[0].hi) +
                                       " is traversed in the same direction by quads " +
                                       std::to_string(group[0].quad) + " and " +
                                       std::to_string(group[1].quad)});
    }
  });
  return report;
}

ValidationReport validate(const QuadMesh& mesh) {
  ValidationReport report;
  const std::size_t n = mesh.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mesh.vertices[i].allFinite()) {
      report.violations.push_back(
          {ViolationKind::non_finite, "vertex " + std::to_string(i) + " is not finite"});
    }
  }
  if (mesh.labels.size() != mesh.quads.size()) {
    report.violations.push_back({ViolationKind::label,
                                 std::to_string(mesh.labels.size()) + " labels for " +
                                     std::to_string(mesh.quads.size()) + " quads"});
  }
  ValidationReport topo = validate_topology(n, mesh.quads);
  report.violations.insert(report.violations.end(), topo.violations.begin(),
                           topo.violations.end());

  for (const auto& [name, index] : mesh.landmarks) {
    if (index < 0 || static_cast<std::size_t>(index) >= n) {
      report.violations.push_back(
          {ViolationKind::landmark, "landmark " + name + " has invalid index " + std::to_string(index)});
    }
  }

  // Boundary loops must cover every boundary edge exactly once.
  const auto boundary = boundary_edges(mesh.quads);
  std::vector<int> covered(boundary.size(), 0);
  auto locate = [&](int a, int b) -> std::ptrdiff_t {
    std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    auto it = std::lower_bound(boundary.begin(), boundary.end(), key);
    if (it == boundary.end() || *it != key) return -1;
    return it - boundary.begin();
  };
  for (const BoundaryLoop& loop : mesh.boundary_loops) {
    const auto& vs = loop.vertices;
    if (vs.size() < 2) {
      report.violations.push_back(
          {ViolationKind::boundary_loop, "loop " + loop.name + " has fewer than 2 vertices"});
      continue;
    }
    const std::size_t segments = loop.closed ? vs.size() : vs.size() - 1;
    for (std::size_t s = 0; s < segments; ++s) {
      int a = vs[s], b = vs[(s + 1) % vs.size()];
      std::ptrdiff_t at = locate(a, b);
      if (at < 0) {
        report.violations.push_back({ViolationKind::boundary_loop,
                                     "loop " + loop.name + " segment " + edge_str(a, b) +
                                         " is not a boundary edge"});
      } else if (++covered[static_cast<std::size_t>(at)] == 2) {
        report.violations.push_back({ViolationKind::boundary_loop,
                                     "boundary edge " + edge_str(a, b) + " is covered twice"});
      }
    }
  }
  for (std::size_t e = 0; e < boundary.size(); ++e) {
    if (covered[e] == 0) {
      report.violations.push_back(
          {ViolationKind::boundary_loop,
           "boundary edge " + edge_str(boundary[e][0], boundary[e][1]) + " is not in any loop"});
    }
  }
  return report;
}

ValidationReport validate(const TriSurface& surface) {
  ValidationReport report;
  const std::size_t n = surface.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!surface.vertices[i].allFinite()) {
      report.violations.push_back(
          {ViolationKind::non_finite, "vertex " + std::to_string(i) + " is not finite"});
    }
  }
  for (std::size_t t = 0; t < surface.triangles.size(); ++t) {
    const Tri& tri = surface.triangles[t];
    bool in_range = std::all_of(tri.begin(), tri.end(), [n](int v) {
      return v >= 0 && static_cast<std::size_t>(v) < n;
    });
    if (!in_range) {
      report.violations.push_back(
          {ViolationKind::index_range, "triangle " + std::to_string(t) + " has an invalid index"});
      continue;
    }
    const Vec3& a = surface.vertices[tri[0]];
    const Vec3& b = surface.vertices[tri[1]];
    const Vec3& c = surface.vertices[tri[2]];
    if (0.5 * (b - a).cross(c - a).norm() <= 1e-12) {
      report.violations.push_back(
          {ViolationKind::degenerate_triangle, "triangle " + std::to_string(t) + " has zero area"});
    }
  }
  if (!surface.vertex_normals.empty()) {
    if (surface.vertex_normals.size() != n) {
      report.violations.push_back({ViolationKind::normal_length, "normal count differs from vertex count"});
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(surface.vertex_normals[i].norm() - 1.0) > 1e-9) {
          report.violations.push_back(
              {ViolationKind::normal_length, "normal " + std::to_string(i) + " is not unit length"});
        }
      }
    }
  }
  return report;
}

AdjacencyTable build_adjacency(std::size_t vertex_count, std::span<const Quad> quads) {
  ValidationReport report = validate_topology(vertex_count, quads);
  if (!report.ok()) throw ValidationError("invalid quad connectivity: " + report.summary());

  AdjacencyTable adj;
  adj.neighbors.resize(vertex_count);
  adj.boundary.assign(vertex_count, false);
  const auto edges = collect_edges(vertex_count, quads);
  for_each_edge_group(edges, [&](std::span<const DirectedEdge> group) {
    int a = group[0].lo, b = group[0].hi;
    adj.neighbors[a].push_back(b);
    adj.neighbors[b].push_back(a);
    if (group.size() == 1) {
      adj.boundary[a] = true;
      adj.boundary[b] = true;
    }
  });
  for (auto& list : adj.neighbors) std::sort(list.begin(), list.end());
  return adj;
}

AdjacencyTable build_adjacency(const QuadMesh& mesh) {
  return build_adjacency(mesh.vertices.size(), mesh.quads);
}

AdjacencyTable build_adjacency(std::size_t vertex_count, std::span<const Tri> triangles) {
  std::vector<std::array<int, 3>> edges;  // lo, hi, unused
  edges.reserve(triangles.size() * 3);
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const Tri& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= vertex_count ||
          static_cast<std::size_t>(b) >= vertex_count || a == b) {
        throw ValidationError("triangle " + std::to_string(t) + " has an invalid index");
      }
      edges.push_back({std::min(a, b), std::max(a, b), 0});
    }
  }
  std::sort(edges.begin(), edges.end());
  AdjacencyTable adj;
  adj.neighbors.resize(vertex_count);
  adj.boundary.assign(vertex_count, false);
  std::size_t i = 0;
  while (i < edges.size()) {
    std::size_t j = i + 1;
    while (j < edges.size() && edges[j][0] == edges[i][0] && edges[j][1] == edges[i][1]) ++j;
    int a = edges[i][0], b = edges[i][1];
    adj.neighbors[a].push_back(b);
    adj.neighbors[b].push_back(a);
    if (j - i == 1) {
      adj.boundary[a] = true;
      adj.boundary[b] = true;
    }
    i = j;
  }
  for (auto& list : adj.neighbors) std::sort(list.begin(), list.end());
  return adj;
}

std::vector<std::array<int, 2>> boundary_edges(std::span<const Quad> quads) {
  int max_index = -1;
  for (const Quad& q : quads)
    for (int v : q) max_index = std::max(max_index, v);
  const auto edges = collect_edges(static_cast<std::size_t>(max_index + 1), quads);
  std::vector<std::array<int, 2>> out;
  for_each_edge_group(edges, [&](std::span<const DirectedEdge> group) {
    if (group.size() == 1) out.push_back({group[0].lo, group[0].hi});
  });
  return out;
}

std::vector<std::array<int, 2>> unique_edges(std::span<const Quad> quads) {
  int max_index = -1;
  for (const Quad& q : quads)
    for (int v : q) max_index = std::max(max_index, v);
  const auto edges = collect_edges(static_cast<std::size_t>(max_index + 1), quads);
  std::vector<std::array<int, 2>> out;
  for_each_edge_group(edges,
                      [&](std::span<const DirectedEdge> group) { out.push_back({group[0].lo, group[0].hi}); });
  return out;
}

std::vector<BoundaryLoop> extract_boundary_loops(std::size_t vertex_count,
                                                 std::span<const Quad> quads) {
  const auto edges = collect_edges(vertex_count, quads);
  std::vector<std::array<int, 2>> directed;
  for_each_edge_group(edges, [&](std::span<const DirectedEdge> group) {
    if (group.size() > 2) {
      throw TopologyError("non-manifold edge " + edge_str(group[0].lo, group[0].hi));
    }
    if (group.size() == 1) directed.push_back({group[0].from, group[0].to});
  });
  std::sort(directed.begin(), directed.end());

  std::vector<int> in_degree(vertex_count, 0), out_degree(vertex_count, 0);
  for (const auto& e : directed) {
    ++out_degree[e[0]];
    ++in_degree[e[1]];
  }
  std::vector<bool> used(directed.size(), false);
  auto next_edge = [&](int from) -> std::ptrdiff_t {
    auto it = std::lower_bound(directed.begin(), directed.end(), std::array<int, 2>{from, -1});
    for (; it != directed.end() && (*it)[0] == from; ++it) {
      auto idx = it - directed.begin();
      if (!used[static_cast<std::size_t>(idx)]) return idx;
    }
    return -1;
  };

  std::vector<BoundaryLoop> loops;
  auto walk = [&](std::size_t first) {
    BoundaryLoop loop;
    loop.closed = false;
    const int start = directed[first][0];
    loop.vertices.push_back(start);
    std::ptrdiff_t e = static_cast<std::ptrdiff_t>(first);
    while (e >= 0) {
      used[static_cast<std::size_t>(e)] = true;
      const int to = directed[static_cast<std::size_t>(e)][1];
      if (to == start) {
        loop.closed = true;
        break;
      }
      loop.vertices.push_back(to);
      e = next_edge(to);
    }
    loop.name = "loop" + std::to_string(loops.size());
    loops.push_back(std::move(loop));
  };
  // Open chains first, from their heads, so they come back maximal.
  for (std::size_t i = 0; i < directed.size(); ++i) {
    if (!used[i] && out_degree[directed[i][0]] > in_degree[directed[i][0]]) walk(i);
  }
  for (std::size_t i = 0; i < directed.size(); ++i) {
    if (!used[i]) walk(i);
  }
  return loops;
}

std::vector<BoundaryLoop> extract_boundary_loops(const QuadMesh& mesh) {
  return extract_boundary_loops(mesh.vertices.size(), mesh.quads);
}

std::vector<int> component_vertices(const QuadMesh& mesh, Component c) {
  std::vector<char> mark(mesh.vertices.size(), 0);
  for (std::size_t f = 0; f < mesh.quads.size() && f < mesh.labels.size(); ++f) {
    if (mesh.labels[f] != c) continue;
    for (int v : mesh.quads[f]) mark[static_cast<std::size_t>(v)] = 1;
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < mark.size(); ++i)
    if (mark[i]) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> referenced_vertices(const QuadMesh& mesh) {
  std::vector<char> mark(mesh.vertices.size(), 0);
  for (const Quad& q : mesh.quads)
    for (int v : q) mark[static_cast<std::size_t>(v)] = 1;
  std::vector<int> out;
  for (std::size_t i = 0; i < mark.size(); ++i)
    if (mark[i]) out.push_back(static_cast<int>(i));
  return out;
}

Vec3 quad_normal(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Vec3 n = (c - a).cross(d - b);
  double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

std::vector<Vec3> vertex_normals(Vertices vertices, std::span<const Tri> triangles) {
  std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
  for (const Tri& t : triangles) {
    Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    for (int v : t) normals[static_cast<std::size_t>(v)] += n;
  }
  for (Vec3& n : normals) {
    double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  return normals;
}

std::vector<Tri> triangulate(std::span<const Quad> quads) {
  std::vector<Tri> tris;
  tris.reserve(quads.size() * 2);
  for (const Quad& q : quads) {
    tris.push_back({q[0], q[1], q[2]});
    tris.push_back({q[0], q[2], q[3]});
  }
  return tris;
}

bool same_topology(const QuadMesh& a, const QuadMesh& b) {
  if (a.vertices.size() != b.vertices.size() || a.quads != b.quads || a.labels != b.labels ||
      a.landmarks != b.landmarks || a.boundary_loops.size() != b.boundary_loops.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.boundary_loops.size(); ++i) {
    const auto& la = a.boundary_loops[i];
    const auto& lb = b.boundary_loops[i];
    if (la.name != lb.name || la.vertices != lb.vertices || la.closed != lb.closed) return false;
  }
  return true;
}

double mean_edge_length(Vertices vertices, std::span<const Quad> quads) {
  const auto edges = unique_edges(quads);
  if (edges.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : edges) sum += (vertices[e[0]] - vertices[e[1]]).norm();
  return sum / static_cast<double>(edges.size());
}

}  // namespace quadfit
