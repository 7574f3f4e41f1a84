#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quadfit/geometry.hpp"

namespace quadfit {

enum class Component : std::uint8_t { wall, leaflet0, leaflet1, leaflet2 };

inline constexpr std::array<Component, 4> kComponents = {Component::wall, Component::leaflet0,
                                                         Component::leaflet1, Component::leaflet2};

std::string_view component_name(Component c);
std::optional<Component> parse_component(std::string_view name);

// Landmark names carried by valve templates.
inline constexpr std::array<std::string_view, 6> kLandmarkNames = {"H0", "H1", "H2",
                                                                   "C01", "C12", "C20"};

struct BoundaryLoop {
  std::string name;
  std::vector<int> vertices;
  bool closed = true;
};

// Structured quadrilateral surface mesh. Quads wind counter-clockwise seen
// from the side the normal (cross product of the diagonals) points to.
// Component labels live on quads.
struct QuadMesh {
  std::vector<Vec3> vertices;
  std::vector<Quad> quads;
  std::vector<Component> labels;
  std::vector<BoundaryLoop> boundary_loops;
  std::map<std::string, int> landmarks;

  const BoundaryLoop* find_loop(std::string_view name) const;
};

// Target triangulated surface. `vertex_normals` is empty when absent.
struct TriSurface {
  std::vector<Vec3> vertices;
  std::vector<Tri> triangles;
  std::vector<Vec3> vertex_normals;
};

enum class ViolationKind {
  index_range,
  repeated_vertex,
  non_manifold_edge,
  orientation,
  landmark,
  boundary_loop,
  label,
  non_finite,
  degenerate_triangle,
  normal_length,
};

std::string_view violation_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
  std::string summary() const;
};

// Full invariant check. Violations are data; this never throws.
ValidationReport validate(const QuadMesh& mesh);
ValidationReport validate(const TriSurface& surface);

// Connectivity-only subset of validate(): index range, repeated vertices,
// edge manifoldness and orientation.
ValidationReport validate_topology(std::size_t vertex_count, std::span<const Quad> quads);

struct AdjacencyTable {
  // Sorted, duplicate-free edge neighbours of every vertex.
  std::vector<std::vector<int>> neighbors;
  // True for vertices incident to a boundary edge.
  std::vector<bool> boundary;

  std::size_t size() const { return neighbors.size(); }
};

// Throws ValidationError when the connectivity is invalid.
AdjacencyTable build_adjacency(const QuadMesh& mesh);
AdjacencyTable build_adjacency(std::size_t vertex_count, std::span<const Quad> quads);
AdjacencyTable build_adjacency(std::size_t vertex_count, std::span<const Tri> triangles);

// Maximal chains of boundary edges, directed as in their quad. Cycles come
// back with closed = true and start at their smallest vertex index. Loops are
// named "loop0", "loop1", ... in that order. Throws TopologyError on an edge
// shared by more than two quads.
std::vector<BoundaryLoop> extract_boundary_loops(const QuadMesh& mesh);
std::vector<BoundaryLoop> extract_boundary_loops(std::size_t vertex_count,
                                                 std::span<const Quad> quads);

// Undirected edges (a < b) used by exactly one quad, sorted.
std::vector<std::array<int, 2>> boundary_edges(std::span<const Quad> quads);

// Undirected edges (a < b) of a quad mesh, sorted.
std::vector<std::array<int, 2>> unique_edges(std::span<const Quad> quads);

// Sorted indices of vertices incident to at least one quad labelled `c`.
std::vector<int> component_vertices(const QuadMesh& mesh, Component c);

// Sorted indices of vertices referenced by any quad.
std::vector<int> referenced_vertices(const QuadMesh& mesh);

// Quad normal: normalised cross product of the diagonals. Zero for
// degenerate quads.
Vec3 quad_normal(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// Area-weighted unit vertex normals. Vertices without incident area get
// a zero vector.
std::vector<Vec3> vertex_normals(Vertices vertices, std::span<const Tri> triangles);

// Split each quad along its (0,2) diagonal.
std::vector<Tri> triangulate(std::span<const Quad> quads);

// True when both meshes have the same quads, labels, loops and landmarks.
bool same_topology(const QuadMesh& a, const QuadMesh& b);

double mean_edge_length(Vertices vertices, std::span<const Quad> quads);

}  // namespace quadfit
