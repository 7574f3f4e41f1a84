#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "quadfit/geometry.hpp"
#include "quadfit/mesh.hpp"

namespace quadfit::test {

inline std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> out(n);
  for (Vec3& p : out) p = Vec3(u(rng), u(rng), u(rng));
  return out;
}

inline std::vector<Vec3> jittered(Vertices v, std::uint64_t seed, double amount) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  std::vector<Vec3> out(v.begin(), v.end());
  for (Vec3& p : out) p += Vec3(u(rng), u(rng), u(rng));
  return out;
}

inline double max_abs_diff(Vertices a, Vertices b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

inline double inf_norm(Vertices a) {
  double m = 0.0;
  for (const Vec3& p : a) m = std::max(m, p.cwiseAbs().maxCoeff());
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("quadfit_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace quadfit::test
