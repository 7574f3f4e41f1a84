#pragma once

#include <cstdint>
#include <vector>

#include "quadfit/geometry.hpp"
#include "quadfit/mesh.hpp"

namespace quadfit {

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  int triangle = -1;
  // Weights of the triangle's corners; non-negative, summing to one.
  Vec3 barycentric = Vec3::Zero();
};

// Exact closest point on the closed triangle (a, b, c). Throws GeometryError
// when the triangle area is at most 1e-12 mm^2.
ClosestPoint closest_point_on_triangle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c);

// Axis-aligned bounding-volume hierarchy over the triangles of a surface.
// Immutable after construction; queries may run concurrently.
class SurfaceIndex {
 public:
  struct Node {
    Box box;
    int left = -1;   // child node indices, -1 for leaves
    int right = -1;
    int first = 0;   // range into triangle_order() for leaves
    int count = 0;
    bool leaf() const { return left < 0; }
  };

  SurfaceIndex() = default;
  // Triangles with area <= 1e-12 mm^2 are left out of the hierarchy and
  // counted in skipped_degenerate().
  SurfaceIndex(Vertices vertices, std::span<const Tri> triangles, int leaf_size = 8);
  explicit SurfaceIndex(const TriSurface& surface, int leaf_size = 8);

  // Globally closest surface point; ties go to the smallest triangle index.
  // Throws QueryError when the index holds no triangles.
  ClosestPoint nearest(const Vec3& q) const;

  bool empty() const { return order_.empty(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Tri>& triangles() const { return triangles_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& triangle_order() const { return order_; }
  std::size_t skipped_degenerate() const { return skipped_; }
  int leaf_size() const { return leaf_size_; }

  // Checks containment of every leaf triangle in all its ancestor boxes and
  // that every indexed triangle sits in exactly one leaf.
  bool verify() const;

 private:
  int build(int first, int count);

  std::vector<Vec3> vertices_;
  std::vector<Tri> triangles_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Box> tri_boxes_;
  std::size_t skipped_ = 0;
  int leaf_size_ = 8;
};

ClosestPoint nearest_on_surface(const Vec3& q, const SurfaceIndex& index);

struct NearestVertex {
  int index = -1;
  double distance = 0.0;
};

// Linear scan; ties go to the smallest index. Throws QueryError when empty.
NearestVertex nearest_vertex(const Vec3& q, Vertices points);

// `count` points distributed uniformly by area over the triangles,
// deterministic for a given seed.
std::vector<Vec3> sample_surface(Vertices vertices, std::span<const Tri> triangles,
                                 std::size_t count, std::uint64_t seed);

}  // namespace quadfit
