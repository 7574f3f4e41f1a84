#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quadfit/constraints.hpp"
#include "quadfit/geometry.hpp"
#include "quadfit/losses.hpp"
#include "quadfit/mesh.hpp"
#include "quadfit/metrics.hpp"
#include "quadfit/spatial.hpp"

namespace quadfit {

struct AffineTransform {
  Mat3 A = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 operator()(const Vec3& p) const { return A * p + t; }
  std::vector<Vec3> apply(Vertices points) const;
};

enum class ProjectionMode { surface, vertex };

// What the shape regularizers measure against: the affine-aligned template
// (deviation from its umbrella vectors, side ratios and corner angles) or the
// ideal square element.
enum class RegularizerReference { template_shape, ideal };

struct FitConfig {
  // Affine rounds (matching + least squares), smoothing rounds, boundary
  // stage and interior stage iterations.
  int n0 = 50;
  int n1 = 20;
  int n2 = 300;
  int n3 = 300;
  LossWeights weights;
  RegularizerReference reference = RegularizerReference::template_shape;
  // Unset means 0.01 * mean template edge length.
  std::optional<double> learning_rate_boundary;
  std::optional<double> learning_rate_interior;
  // Linear learning-rate decay to this fraction by the last iteration.
  double lr_final_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double omega = 0.5;
  ProjectionMode projection = ProjectionMode::surface;
  double boundary_snap_weight = 10.0;
  // Unset means 4 * template vertex count.
  std::optional<int> chamfer_sample_count;
  bool chamfer_bidirectional = true;
  std::uint64_t seed = 0;

  // Throws ValidationError.
  void validate() const;
};

// Maps every loop vertex to the polyline point at the same normalised arc
// length. For closed loops the polyline start (any of its points) and the
// direction are chosen to minimise the summed squared distance to
// `loop_points`; open loops only choose the direction.
std::vector<Vec3> arclength_match(Vertices loop_points, bool loop_closed,
                                  const BoundaryConstraint& polyline);

// Template boundary vertex -> matched target point, in constraint order.
struct BoundaryMatch {
  std::vector<int> vertices;
  std::vector<Vec3> targets;

  double mean_distance(Vertices positions) const;
};

BoundaryMatch match_boundary(const QuadMesh& mesh, Vertices positions,
                             const BoundaryConstraintSet& constraints);

// Closed-form least squares for A x + t = y. Throws
// DegenerateConstraintError when the centred sources span fewer than three
// directions or |det A| <= 1e-9.
AffineTransform solve_affine(Vertices source, Vertices target);

struct AffineFit {
  AffineTransform transform;
  double rms = 0.0;
  int rounds = 0;
};

// Alternates arc-length matching of the transformed template boundary with
// the least-squares solve, for at most `max_rounds` rounds. The start comes
// from loop centroids (full affine with >= 4 non-coplanar loops, otherwise
// translation only).
AffineFit fit_affine(const QuadMesh& templ, const BoundaryConstraintSet& constraints,
                     int max_rounds = 50);

// Umbrella relaxation of unfixed vertices with factor omega. A round whose
// step would raise loss_mc is retried with half the factor; relaxation stops
// early when no tried factor lowers it. `trace` receives loss_mc before the
// first round and after every accepted round.
std::vector<Vec3> relax_laplacian(Vertices vertices, const AdjacencyTable& adj,
                                  const std::vector<bool>& fixed, int iterations,
                                  double omega = 0.5, std::vector<double>* trace = nullptr);

enum class Stage { boundary, interior };

struct StageProblem {
  std::span<const Quad> quads;
  const AdjacencyTable* adj = nullptr;
  const SurfaceIndex* target = nullptr;
  std::vector<Vec3> target_samples;
  bool bidirectional = true;
  LossWeights weights;
  // Empty for absolute regularizers.
  std::vector<Vec3> reference;
  // Boundary stage: snap targets; interior stage: vertices held still.
  BoundaryMatch snap;
  double snap_weight = 0.0;
  std::vector<bool> frozen;
};

// Full stage objective at `x`.
LossValue stage_loss(const StageProblem& problem, Vertices x);

struct AdamOptions {
  int iterations = 0;
  double learning_rate = 0.01;
  double final_fraction = 0.1;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

// Adam on a displacement field added to `start`. Frozen vertices get a zero
// gradient, as do gradient entries below 1e-12 (rounding noise).
// Throws DivergenceError on a non-finite loss or gradient.
std::vector<Vec3> optimize_stage(const StageProblem& problem, Vertices start,
                                 const AdamOptions& options, std::vector<double>* trace = nullptr);

std::vector<Vec3> final_projection(Vertices vertices, const SurfaceIndex& target,
                                   ProjectionMode mode);

struct FitReport {
  AffineFit affine;
  double boundary_distance_after_affine = 0.0;
  double boundary_distance_after_boundary_stage = 0.0;
  double learning_rate_boundary = 0.0;
  double learning_rate_interior = 0.0;
  std::vector<double> relax_trace;
  std::vector<double> boundary_trace;
  std::vector<double> interior_trace;
  double surface_distance_mean = 0.0;
  double surface_distance_max = 0.0;
  // surface_chamfer against the target, for the aligned template and the fit.
  double surface_chamfer_affine = 0.0;
  double surface_chamfer = 0.0;
  QualityStats quality;
  // Filled when a ground truth is supplied.
  std::optional<MetricsReport> metrics;
  std::optional<MetricsReport> affine_metrics;
};

struct FitResult {
  QuadMesh mesh;
  FitReport report;
};

// Affine alignment, smoothing, boundary stage, interior stage, projection.
// The output shares quads, labels, loops and landmarks with `templ`.
FitResult run_pipeline(const QuadMesh& templ, const TriSurface& target,
                       const BoundaryConstraintSet& constraints, const FitConfig& config,
                       const QuadMesh* truth = nullptr);

}  // namespace quadfit
