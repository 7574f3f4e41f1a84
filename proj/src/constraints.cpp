#include "quadfit/constraints.hpp"

#include <set>

#include "quadfit/errors.hpp"

namespace quadfit {

void validate_constraints(const QuadMesh& mesh, const BoundaryConstraintSet& constraints) {
  std::set<std::string> seen;
  for (const BoundaryConstraint& c : constraints) {
    const BoundaryLoop* loop = mesh.find_loop(c.loop);
    if (!loop) throw ValidationError("constraint references unknown loop '" + c.loop + "'");
    if (!seen.insert(c.loop).second) throw ValidationError("loop '" + c.loop + "' constrained twice");
    if (c.points.size() < 2) throw ValidationError("constraint '" + c.loop + "' has fewer than 2 points");
    if (loop->vertices.size() < 2) throw ValidationError("loop '" + c.loop + "' has fewer than 2 vertices");
    if (loop->closed != c.closed) {
      throw ValidationError("constraint '" + c.loop + "': open/closed status differs from the template loop");
    }
    if (!all_finite(c.points)) throw ValidationError("constraint '" + c.loop + "' has non-finite points");
  }
}

}  // namespace quadfit
