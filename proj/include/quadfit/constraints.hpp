#pragma once

#include <string>
#include <vector>

#include "quadfit/geometry.hpp"
#include "quadfit/mesh.hpp"

namespace quadfit {

// Target polyline for one named template boundary loop.
struct BoundaryConstraint {
  std::string loop;
  bool closed = true;
  // Closed polylines do not repeat their first point.
  std::vector<Vec3> points;
};

using BoundaryConstraintSet = std::vector<BoundaryConstraint>;

// Throws ValidationError when a loop is missing from the template, a polyline
// has fewer than 2 points or non-finite coordinates, or open/closed status
// disagrees with the template loop.
void validate_constraints(const QuadMesh& mesh, const BoundaryConstraintSet& constraints);

}  // namespace quadfit
