#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace quadfit {

// Names accepted by GradcheckOptions::losses and ::corrupt.
std::vector<std::string> gradcheck_loss_names();

struct GradcheckOptions {
  // Empty runs every loss.
  std::vector<std::string> losses;
  int cases_per_loss = 20;
  double h = 1e-5;
  // Relative infinity-norm tolerance between analytic and central differences.
  double tolerance = 1e-4;
  // Draws closer than this to a nearest-neighbour switch or absolute-value
  // kink are redrawn. The finite-difference stencil reach is added on top.
  double margin = 1e-6;
  int max_redraws = 50;
  std::uint64_t seed = 0;
  // Negative-control hook: perturbs the analytic gradient of this loss.
  std::string corrupt;
};

struct GradcheckCase {
  std::string loss;
  int index = 0;
  std::string mesh;  // "grid NxN" or "tube CxR"
  int vertices = 0;
  int redraws = 0;
  double value = 0.0;
  double error = 0.0;  // relative infinity-norm difference
  bool passed = false;
  std::string note;
};

struct GradcheckResult {
  std::vector<GradcheckCase> cases;
  bool passed() const;
};

// Throws ConfigError for unknown loss names or bad options.
GradcheckResult run_gradcheck(const GradcheckOptions& options);

}  // namespace quadfit
