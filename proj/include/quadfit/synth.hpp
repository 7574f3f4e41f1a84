#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "quadfit/constraints.hpp"
#include "quadfit/geometry.hpp"
#include "quadfit/mesh.hpp"

namespace quadfit {

struct TemplateSpec {
  double radius = 12.0;
  double height = 20.0;
  // Wall columns around the circumference; must be divisible by 6.
  int circumferential = 36;
  // Wall rows along the axis.
  int axial = 10;
  // Leaflet rows from hinge to free edge.
  int leaflet_radial = 4;
  // Quads along each hinge. Fixed by the wall: circumferential / 3 - 2.
  std::optional<int> leaflet_angular;

  int derived_angular() const { return circumferential / 3 - 2; }
  // Throws ValidationError.
  void validate() const;
};

// Valve-like template. The wall is an open cylinder about the z axis from
// z = 0 to z = height. Leaflet l hangs from a V-shaped hinge made of
// wall-quad diagonals between commissure columns l*m and (l+1)*m, with
// m = circumferential / 3; its rows shrink geometrically toward the axis so
// every leaflet quad is a planar trapezoid. Hinge vertices are shared with
// the wall.
//
// Loops: wall_top, wall_bottom, leaflet{0,1,2}_rim (hinge plus free edge).
// Landmarks: H<l> is the lowest hinge vertex of leaflet l, C01/C12/C20 the
// top-row wall vertex at the commissure columns m, 2m and 0.
QuadMesh gen_template(const TemplateSpec& spec);

// Planar grid in z = 0 with nx * ny vertices spaced `spacing` apart, one
// boundary loop "boundary", all quads labelled wall.
QuadMesh make_grid(int nx, int ny, double spacing = 1.0);

// Open tube about the z axis: nc columns, na rows of quads, loops "bottom"
// and "top", normals pointing outward.
QuadMesh make_tube(int nc, int na, double radius = 1.0, double height = 1.0);

enum class WarpKind { identity, radial_bulge, axial_twist, anisotropic_scale, composite };

std::string_view warp_kind_name(WarpKind kind);
std::optional<WarpKind> parse_warp_kind(std::string_view name);

// Smooth closed-form deformations about the z axis. `zeta` below is the
// height normalised to [0, 1] over the template's z range.
//
//   radial_bulge       xy *= 1 + bulge * sin(pi zeta),           |bulge| <= 0.3
//   axial_twist        rotate by twist_deg * (zeta - 0.5),      |twist_deg| <= 30
//   anisotropic_scale  diag(scale),                              scale in [0.5, 2]
//   composite          scale o twist o (bulge + lobe * cos(3 phi + phase)) with
//                      coefficients drawn from `seed`: bulge in [0.05, 0.1],
//                      lobe in [0, 0.05], twist in [-10, 10] deg, scale in [0.9, 1.1]
//
// All maps have a positive Jacobian determinant inside these ranges.
struct WarpSpec {
  WarpKind kind = WarpKind::identity;
  // Fraction of the template radius.
  double bulge = 0.1;
  double twist_deg = 10.0;
  Vec3 scale = Vec3(1.1, 0.95, 1.05);
  std::uint64_t seed = 0;

  // Throws ValidationError for amplitudes outside the documented ranges.
  void validate() const;
};

class Warp {
 public:
  // Frame (z range) taken from `bounds`.
  Warp(const WarpSpec& spec, const Box& bounds);

  Vec3 operator()(const Vec3& p) const;
  // Central-difference Jacobian.
  Mat3 jacobian(const Vec3& p, double h = 1e-6) const;

  // Effective coefficients (resolved from the seed for composite warps).
  double bulge() const { return bulge_; }
  double lobe() const { return lobe_; }
  double phase() const { return phase_; }
  double twist_rad() const { return twist_; }
  const Vec3& scale() const { return scale_; }

 private:
  double z0_ = 0.0, z1_ = 1.0;
  double bulge_ = 0.0, lobe_ = 0.0, phase_ = 0.0, twist_ = 0.0;
  Vec3 scale_ = Vec3::Ones();
};

// Smallest Jacobian determinant over `samples` uniform points in `box`.
double min_jacobian_determinant(const Warp& warp, const Box& box, int samples, std::uint64_t seed);

// Split every quad into (2^level)^2 bilinear sub-quads with shared edge
// points, then split each sub-quad along its (0,2) diagonal.
TriSurface refine_surface(const QuadMesh& mesh, int level);

struct SyntheticCase {
  TriSurface target;
  BoundaryConstraintSet constraints;
  QuadMesh truth;
  // Largest distance from a ground-truth vertex to the target surface.
  double refinement_error = 0.0;
};

// Warped refined target with unit vertex normals, warped refined boundary
// polylines as constraints, and the warped template as ground truth.
// `level` must lie in [2, 4].
SyntheticCase gen_target(const QuadMesh& templ, const WarpSpec& warp, int level = 3);

}  // namespace quadfit
