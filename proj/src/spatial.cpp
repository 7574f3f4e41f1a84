#include "quadfit/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "quadfit/errors.hpp"

namespace quadfit {

namespace {

constexpr double kDegenerateArea = 1e-12;

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// Region-based closest point (Ericson, Real-Time Collision Detection 5.1.5).
// Barycentric weights are formed from the same sub-determinants as the
// point, so they are non-negative by construction.
void closest_point_impl(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c, Vec3& out,
                        Vec3& bary) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) {
    out = a;
    bary = {1.0, 0.0, 0.0};
    return;
  }
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) {
    out = b;
    bary = {0.0, 1.0, 0.0};
    return;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    out = a + v * ab;
    bary = {1.0 - v, v, 0.0};
    return;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) {
    out = c;
    bary = {0.0, 0.0, 1.0};
    return;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    out = a + w * ac;
    bary = {1.0 - w, 0.0, w};
    return;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    out = b + w * (c - b);
    bary = {0.0, 1.0 - w, w};
    return;
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  out = a + ab * v + ac * w;
  bary = {va * denom, v, w};
}

}  // namespace

ClosestPoint closest_point_on_triangle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  if (!(triangle_area(a, b, c) > kDegenerateArea)) {
    throw GeometryError("closest_point_on_triangle: degenerate triangle");
  }
  ClosestPoint r;
  closest_point_impl(q, a, b, c, r.point, r.barycentric);
  r.distance = (q - r.point).norm();
  return r;
}

SurfaceIndex::SurfaceIndex(Vertices vertices, std::span<const Tri> triangles, int leaf_size)
    : vertices_(vertices.begin(), vertices.end()),
      triangles_(triangles.begin(), triangles.end()),
      leaf_size_(std::max(1, leaf_size)) {
  const auto n = static_cast<int>(vertices_.size());
  tri_boxes_.resize(triangles_.size());
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const Tri& tri = triangles_[t];
    for (int v : tri) {
      if (v < 0 || v >= n) throw ValidationError("SurfaceIndex: triangle index out of range");
    }
    const Vec3& a = vertices_[tri[0]];
    const Vec3& b = vertices_[tri[1]];
    const Vec3& c = vertices_[tri[2]];
    if (!(triangle_area(a, b, c) > kDegenerateArea)) {
      ++skipped_;
      continue;
    }
    tri_boxes_[t].extend(a);
    tri_boxes_[t].extend(b);
    tri_boxes_[t].extend(c);
    order_.push_back(static_cast<int>(t));
  }
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / static_cast<std::size_t>(leaf_size_) + 2);
    build(0, static_cast<int>(order_.size()));
  }
}

SurfaceIndex::SurfaceIndex(const TriSurface& surface, int leaf_size)
    : SurfaceIndex(surface.vertices, surface.triangles, leaf_size) {}

int SurfaceIndex::build(int first, int count) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Box box;
  for (int i = first; i < first + count; ++i) box.extend(tri_boxes_[order_[i]]);
  nodes_[id].box = box;
  if (count <= leaf_size_) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  const Vec3 extent = box.hi - box.lo;
  int axis = 0;
  if (extent[1] > extent[axis]) axis = 1;
  if (extent[2] > extent[axis]) axis = 2;
  auto key = [&](int t) { return tri_boxes_[t].lo[axis] + tri_boxes_[t].hi[axis]; };
  std::sort(order_.begin() + first, order_.begin() + first + count, [&](int x, int y) {
    const double kx = key(x), ky = key(y);
    return kx < ky || (kx == ky && x < y);
  });
  const int half = count / 2;
  const int left = build(first, half);
  const int right = build(first + half, count - half);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestPoint SurfaceIndex::nearest(const Vec3& q) const {
  if (order_.empty()) throw QueryError("nearest_on_surface: surface has no triangles");
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_tri = -1;
  Vec3 best_point = Vec3::Zero();
  Vec3 best_bary = Vec3::Zero();

  // Boxes are pruned only when strictly farther than the current best with a
  // relative guard, so equidistant triangles are still visited.
  auto prunable = [&](const Node& node) {
    return node.box.squared_distance(q) > best_d2 * (1.0 + 1e-12);
  };

  std::vector<int> stack;
  stack.reserve(64);
  stack.push_back(0);
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (prunable(node)) continue;
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int t = order_[static_cast<std::size_t>(i)];
        const Tri& tri = triangles_[static_cast<std::size_t>(t)];
        Vec3 point, bary;
        closest_point_impl(q, vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]], point, bary);
        const double d2 = (q - point).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && t < best_tri)) {
          best_d2 = d2;
          best_tri = t;
          best_point = point;
          best_bary = bary;
        }
      }
      continue;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& r = nodes_[static_cast<std::size_t>(node.right)];
    if (l.box.squared_distance(q) <= r.box.squared_distance(q)) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  ClosestPoint r;
  r.point = best_point;
  r.distance = std::sqrt(best_d2);
  r.triangle = best_tri;
  r.barycentric = best_bary;
  return r;
}

bool SurfaceIndex::verify() const {
  if (order_.empty()) return nodes_.empty();
  std::vector<int> seen(triangles_.size(), 0);
  // (node, ancestor chain) walk
  std::vector<std::pair<int, std::vector<int>>> stack{{0, {}}};
  while (!stack.empty()) {
    auto [id, chain] = std::move(stack.back());
    stack.pop_back();
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    chain.push_back(id);
    if (node.leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int t = order_[static_cast<std::size_t>(i)];
        ++seen[static_cast<std::size_t>(t)];
        for (int v : triangles_[static_cast<std::size_t>(t)]) {
          for (int a : chain) {
            if (!nodes_[static_cast<std::size_t>(a)].box.contains(vertices_[v])) return false;
          }
        }
      }
    } else {
      stack.push_back({node.left, chain});
      stack.push_back({node.right, chain});
    }
  }
  std::size_t indexed = 0;
  for (int t : order_) {
    if (seen[static_cast<std::size_t>(t)] != 1) return false;
    ++indexed;
  }
  return indexed + skipped_ == triangles_.size();
}

ClosestPoint nearest_on_surface(const Vec3& q, const SurfaceIndex& index) {
  return index.nearest(q);
}

NearestVertex nearest_vertex(const Vec3& q, Vertices points) {
  if (points.empty()) throw QueryError("nearest_vertex: empty point set");
  int best = 0;
  double best_d2 = (points[0] - q).squaredNorm();
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d2 = (points[i] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  return {best, std::sqrt(best_d2)};
}

std::vector<Vec3> sample_surface(Vertices vertices, std::span<const Tri> triangles,
                                 std::size_t count, std::uint64_t seed) {
  std::vector<double> cumulative(triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const Tri& tri = triangles[t];
    total += triangle_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    cumulative[t] = total;
  }
  std::vector<Vec3> samples;
  if (count == 0) return samples;
  if (!(total > 0.0)) throw GeometryError("sample_surface: surface has zero area");
  samples.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < count; ++s) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const Tri& tri = triangles[static_cast<std::size_t>(it - cumulative.begin())];
    double u = unit(rng), v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3& a = vertices[tri[0]];
    samples.push_back(a + u * (vertices[tri[1]] - a) + v * (vertices[tri[2]] - a));
  }
  return samples;
}

}  // namespace quadfit
