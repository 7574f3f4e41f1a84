#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "quadfit/errors.hpp"
#include "quadfit/spatial.hpp"
#include "quadfit/synth.hpp"
#include "support.hpp"

using namespace quadfit;

namespace {

TriSurface icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriSurface s;
  s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  s.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (Vec3& v : s.vertices) v.normalize();
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
      const int idx = static_cast<int>(s.vertices.size()) - 1;
      mid[key] = idx;
      return idx;
    };
    std::vector<Tri> next;
    for (const Tri& f : s.triangles) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.triangles = std::move(next);
  }
  return s;
}

// Linear scan comparing squared distances, ties to the smallest triangle index.
ClosestPoint brute_nearest(const Vec3& q, const TriSurface& s) {
  ClosestPoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.triangles.size(); ++i) {
    const Tri& t = s.triangles[i];
    ClosestPoint c = closest_point_on_triangle(q, s.vertices[t[0]], s.vertices[t[1]], s.vertices[t[2]]);
    const double d2 = (q - c.point).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
      best.triangle = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("closest point on triangle examples") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  auto r = closest_point_on_triangle({0, 0, 1}, a, b, c);
  CHECK((r.point - Vec3(0, 0, 0)).norm() < 1e-15);
  CHECK(r.distance == doctest::Approx(1.0));
  r = closest_point_on_triangle({2, 0, 0}, a, b, c);
  CHECK((r.point - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK(r.distance == doctest::Approx(1.0));
  r = closest_point_on_triangle({0.2, 0.3, -2}, a, b, c);
  CHECK((r.point - Vec3(0.2, 0.3, 0)).norm() < 1e-15);
  CHECK((r.barycentric - Vec3(0.5, 0.2, 0.3)).norm() < 1e-12);
  CHECK_THROWS_AS(closest_point_on_triangle({0, 0, 1}, a, b, Vec3(2, 0, 0)), GeometryError);
}

TEST_CASE("closest point agrees with dense sampling of the triangle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 1000;  // about 5e5 samples per triangle
  for (int pair = 0; pair < 1000; ++pair) {
    const Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), c(u(rng), u(rng), u(rng));
    if ((b - a).cross(c - a).norm() < 0.05) continue;
    const Vec3 q(2 * u(rng), 2 * u(rng), 2 * u(rng));
    const auto r = closest_point_on_triangle(q, a, b, c);
    CHECK(r.distance == doctest::Approx((q - r.point).norm()).epsilon(1e-12));
    CHECK(r.barycentric.minCoeff() >= 0.0);
    CHECK(std::abs(r.barycentric.sum() - 1.0) <= 1e-9);
    CHECK((r.barycentric[0] * a + r.barycentric[1] * b + r.barycentric[2] * c - r.point).norm() < 1e-9);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const double s = static_cast<double>(i) / n, t = static_cast<double>(j) / n;
        best = std::min(best, (a + s * (b - a) + t * (c - a) - q).squaredNorm());
      }
    }
    best = std::sqrt(best);
    CHECK(r.distance <= best + 1e-12);
    CHECK(best - r.distance <= 1e-3);
  }
}

TEST_CASE("surface index equals brute force on small surfaces") {
  std::vector<TriSurface> surfaces;
  surfaces.push_back(icosphere(2));  // 320 triangles
  {
    const QuadMesh g = make_grid(12, 12);
    TriSurface s;
    s.vertices = test::jittered(g.vertices, 3, 0.2);
    s.triangles = triangulate(g.quads);
    surfaces.push_back(s);  // 242 triangles
  }
  {
    const QuadMesh t = make_tube(16, 8, 3.0, 5.0);
    TriSurface s{t.vertices, triangulate(t.quads), {}};
    surfaces.push_back(s);  // 256 triangles, many exact ties
  }
  for (const TriSurface& s : surfaces) {
    REQUIRE(s.triangles.size() <= 500);
    const SurfaceIndex index(s);
    CHECK(index.verify());
    CHECK(index.leaf_size() == 8);
    std::vector<Vec3> queries = test::random_points(1000, 5, 6.0);
    for (std::size_t i = 0; i < 50; ++i) queries.push_back(s.vertices[i % s.vertices.size()]);
    for (const Vec3& q : queries) {
      const ClosestPoint fast = index.nearest(q);
      const ClosestPoint slow = brute_nearest(q, s);
      CHECK(fast.triangle == slow.triangle);
      CHECK(std::abs(fast.distance - slow.distance) <= 1e-12 * std::max(1.0, slow.distance));
    }
  }
}

TEST_CASE("nearest on surface examples") {
  const TriSurface sphere = icosphere(1);
  const SurfaceIndex index(sphere);
  SUBCASE("query on the surface") {
    const Tri& t = sphere.triangles[17];
    const Vec3 q = (sphere.vertices[t[0]] + sphere.vertices[t[1]] + sphere.vertices[t[2]]) / 3.0;
    const auto r = index.nearest(q);
    CHECK(r.distance < 1e-12);
    CHECK((r.point - q).norm() < 1e-12);
  }
  SUBCASE("centre of the sphere") {
    const auto r = index.nearest(Vec3::Zero());
    const auto b = brute_nearest(Vec3::Zero(), sphere);
    CHECK(r.distance == b.distance);
    CHECK(r.triangle == b.triangle);
    CHECK(r.distance < 1.0);
    CHECK(r.distance > 0.8);
  }
  SUBCASE("far away") {
    const Vec3 q(1e6, -3e5, 2e5);
    const auto r = index.nearest(q);
    const auto b = brute_nearest(q, sphere);
    CHECK(std::isfinite(r.distance));
    CHECK(r.distance == b.distance);
    CHECK(r.triangle == b.triangle);
  }
  SUBCASE("projection is idempotent") {
    for (const Vec3& q : test::random_points(200, 9, 3.0)) {
      const auto once = index.nearest(q);
      const auto twice = index.nearest(once.point);
      CHECK(twice.distance <= 1e-12);
      CHECK((twice.point - once.point).norm() <= 1e-12);
    }
  }
  SUBCASE("surface distance never exceeds vertex distance") {
    for (const Vec3& q : test::random_points(300, 10, 3.0)) {
      CHECK(index.nearest(q).distance <= nearest_vertex(q, sphere.vertices).distance + 1e-15);
    }
  }
}

TEST_CASE("degenerate triangles and empty indices") {
  TriSurface s;
  s.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  s.triangles = {{0, 1, 3}, {0, 1, 2}};
  const SurfaceIndex index(s);
  CHECK(index.skipped_degenerate() == 1);
  CHECK(index.nearest({0.1, 0.1, 1}).triangle == 1);
  const SurfaceIndex empty;
  CHECK(empty.empty());
  CHECK_THROWS_AS(empty.nearest(Vec3::Zero()), QueryError);
}

TEST_CASE("nearest vertex") {
  const std::vector<Vec3> pts = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {5, 5, 5}};
  auto r = nearest_vertex(pts[3], pts);
  CHECK(r.index == 3);
  CHECK(r.distance == 0.0);
  r = nearest_vertex({0.6, 0, 0}, std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}});
  CHECK(r.index == 1);
  CHECK(r.distance == doctest::Approx(0.4));
  r = nearest_vertex({0.5, 0, 0}, pts);
  CHECK(r.index == 0);  // tie goes to the smaller index
  CHECK_THROWS_AS(nearest_vertex(Vec3::Zero(), std::vector<Vec3>{}), QueryError);

  const auto cloud = test::random_points(1000, 21);
  const auto queries = test::random_points(10000, 22, 1.5);
  int mismatches = 0;
  for (const Vec3& q : queries) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const double d = (cloud[i] - q).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    const auto got = nearest_vertex(q, cloud);
    mismatches += got.index != best || got.distance != std::sqrt(bd);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("surface sampling") {
  const TriSurface sphere = icosphere(1);
  const auto a = sample_surface(sphere.vertices, sphere.triangles, 500, 42);
  const auto b = sample_surface(sphere.vertices, sphere.triangles, 500, 42);
  const auto c = sample_surface(sphere.vertices, sphere.triangles, 500, 43);
  REQUIRE(a.size() == 500);
  CHECK(test::max_abs_diff(a, b) == 0.0);
  CHECK(test::max_abs_diff(a, c) > 0.0);
  const SurfaceIndex index(sphere);
  for (const Vec3& p : a) CHECK(index.nearest(p).distance < 1e-12);
}
