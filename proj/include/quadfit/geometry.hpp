#pragma once

#include <array>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace quadfit {

// Coordinates are millimetres throughout.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Quad = std::array<int, 4>;
using Tri = std::array<int, 3>;

using Vertices = std::span<const Vec3>;

inline bool all_finite(Vertices points) {
  for (const Vec3& p : points) {
    if (!p.allFinite()) return false;
  }
  return true;
}

inline Vec3 centroid(Vertices points) {
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

struct Box {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Box& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  double diagonal() const { return (hi - lo).norm(); }

  // Squared distance from p to the box; zero inside.
  double squared_distance(const Vec3& p) const {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      double d = 0.0;
      if (p[k] < lo[k]) d = lo[k] - p[k];
      else if (p[k] > hi[k]) d = p[k] - hi[k];
      d2 += d * d;
    }
    return d2;
  }
};

inline Box bounding_box(Vertices points) {
  Box b;
  for (const Vec3& p : points) b.extend(p);
  return b;
}

}  // namespace quadfit
