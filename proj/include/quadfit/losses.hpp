#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quadfit/geometry.hpp"
#include "quadfit/mesh.hpp"
#include "quadfit/spatial.hpp"

namespace quadfit {

// A scalar objective and its gradient with respect to every predicted vertex
// (value units per mm).
struct LossValue {
  double value = 0.0;
  std::vector<Vec3> gradient;
  // Terms left out because their geometry was degenerate.
  std::size_t skipped = 0;
};

struct LossWeights {
  // Regularizer weights keyed by "mc", "flatness", "aspect", "corner".
  std::map<std::string, double> alpha{{"mc", 1.0}, {"flatness", 0.5}, {"aspect", 0.1}, {"corner", 0.1}};
  // Chamfer, normal, edge, Laplacian weights of the composite baselines.
  std::array<double, 4> lambda{1.0, 1.0, 1.0, 1.0};

  // Throws ValidationError on a negative or non-finite weight.
  void validate() const;
  double a(const std::string& name) const;
};

// Mean squared node error with positional correspondence.
LossValue loss_geom(Vertices pred, Vertices truth);

// Mean over nodes of the squared umbrella vector sum_j (v_j - v_i).
LossValue loss_mc(Vertices pred, const AdjacencyTable& adj);

// Symmetric squared Chamfer between point sets; gradient flows to `pred`.
LossValue loss_chamfer(Vertices pred, Vertices target);

// Normal consistency against the nearest target vertex's normal. Faces are
// quads or triangles given as index lists wound counter-clockwise.
LossValue loss_normal(Vertices pred, std::span<const Quad> faces, const TriSurface& target);
LossValue loss_normal(Vertices pred, std::span<const Tri> faces, const TriSurface& target);

// Sum over directed edges of |len^2 - mu^2|. With mu unset the mean edge
// length of `pred` is used and held constant for the gradient.
LossValue loss_edge(Vertices pred, const AdjacencyTable& adj, std::optional<double> mu = {});
double auto_edge_mu(Vertices pred, const AdjacencyTable& adj);

// Sum of squared distances from each node to the mean of its neighbours.
LossValue loss_laplacian(Vertices pred, const AdjacencyTable& adj);

// Mean over quads of the summed squared corner distances to the
// least-squares plane (smallest eigenvalue of the corner scatter).
LossValue loss_flatness(std::span<const Quad> quads, Vertices pred);

// Mean over quads of (r - r_ref)^2. Without a reference r is the max/min
// ratio of the averaged opposite side lengths and r_ref = 1. With a reference
// both ratios are taken in the quad's own (u, v) orientation.
LossValue loss_aspect(std::span<const Quad> quads, Vertices pred, Vertices reference = {});

// Mean over quads of sum_corners (cos theta - cos theta_ref)^2, with
// cos theta_ref = 0 unless a reference geometry is given.
LossValue loss_corner(std::span<const Quad> quads, Vertices pred, Vertices reference = {});

// Squared point-to-surface Chamfer between the predicted quad surface and a
// target surface: mean over predicted vertices of the squared distance to the
// target, plus (bidirectional) mean over target samples of the squared
// distance to the triangulated predicted surface.
LossValue loss_chamfer_surface(Vertices pred, std::span<const Quad> quads,
                               const SurfaceIndex& target, Vertices target_samples,
                               bool bidirectional = true);

// Weighted sum.
LossValue compose_additive(std::span<const LossValue> terms, std::span<const double> lambda);

inline constexpr double kProductFloor = 1e-12;

// Product of max(lambda_k v_k, floor). Floored factors are constant.
LossValue compose_multiplicative(std::span<const LossValue> terms, std::span<const double> lambda,
                                 double floor = kProductFloor);

using ScalarLoss = std::function<double(Vertices)>;

// Central differences (f(v + h e) - f(v - h e)) / 2h per coordinate.
std::vector<Vec3> finite_difference_gradient(const ScalarLoss& f, Vertices pred, double h);

// Two-term training objective: loss_geom + loss_mc.
LossValue training_loss(Vertices pred, Vertices truth, const AdjacencyTable& adj);

enum class Composition { additive, multiplicative };

// Four-term baseline over a predicted quad mesh and a ground-truth surface
// whose vertices are the Chamfer target set.
LossValue baseline_loss(Vertices pred, std::span<const Quad> quads, const AdjacencyTable& adj,
                        const TriSurface& truth, const LossWeights& weights, Composition mode,
                        std::optional<double> mu = {});

}  // namespace quadfit
