#include "quadfit/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/SVD>

#include "quadfit/errors.hpp"

namespace quadfit {

namespace {

// Gradient entries below this are rounding noise. Adam rescales them to
// near unit steps, which would walk an exact optimum away.
constexpr double kGradientNoise = 1e-12;

// Cumulative arc length along a polyline; the closing segment is included
// for closed polylines. Returns n + 1 (closed) or n entries starting at 0.
std::vector<double> cumulative_length(Vertices p, bool closed) {
  const std::size_t segs = closed ? p.size() : p.size() - 1;
  std::vector<double> cum(segs + 1, 0.0);
  for (std::size_t i = 0; i < segs; ++i) {
    cum[i + 1] = cum[i] + (p[(i + 1) % p.size()] - p[i]).norm();
  }
  return cum;
}

// Point at arc-length fraction tau of a polyline described by `cum`.
Vec3 point_at(Vertices p, const std::vector<double>& cum, bool closed, double tau) {
  const double total = cum.back();
  if (closed) tau -= std::floor(tau);
  tau = std::clamp(tau, 0.0, 1.0);
  if (!(total > 0.0)) return p[0];
  const double pos = tau * total;
  auto it = std::upper_bound(cum.begin(), cum.end(), pos);
  std::size_t j = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  const std::size_t segs = cum.size() - 1;
  if (j >= segs) j = segs - 1;
  const double len = cum[j + 1] - cum[j];
  const double w = len > 0.0 ? (pos - cum[j]) / len : 0.0;
  return p[j] + std::clamp(w, 0.0, 1.0) * (p[(j + 1) % p.size()] - p[j]);
}

Vec3 polyline_centroid(Vertices p, bool closed) {
  const std::size_t segs = closed ? p.size() : p.size() - 1;
  Vec3 sum = Vec3::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < segs; ++i) {
    const Vec3& a = p[i];
    const Vec3& b = p[(i + 1) % p.size()];
    const double l = (b - a).norm();
    sum += l * 0.5 * (a + b);
    total += l;
  }
  return total > 0.0 ? Vec3(sum / total) : centroid(p);
}

std::vector<Vec3> gather(Vertices x, const std::vector<int>& idx) {
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(x[static_cast<std::size_t>(i)]);
  return out;
}

double max_abs_diff(const AffineTransform& a, const AffineTransform& b) {
  return std::max((a.A - b.A).cwiseAbs().maxCoeff(), (a.t - b.t).cwiseAbs().maxCoeff());
}

}  // namespace

std::vector<Vec3> AffineTransform::apply(Vertices points) const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(A * p + t);
  return out;
}

void FitConfig::validate() const {
  if (n0 < 0 || n1 < 0 || n2 < 0 || n3 < 0) throw ValidationError("iteration counts must be >= 0");
  weights.validate();
  for (const auto& [name, w] : weights.alpha) {
    if (name != "mc" && name != "flatness" && name != "aspect" && name != "corner") {
      throw ValidationError("unknown regularizer weight '" + name + "'");
    }
  }
  for (const auto& lr : {learning_rate_boundary, learning_rate_interior}) {
    if (lr && !(std::isfinite(*lr) && *lr > 0.0)) throw ValidationError("learning rates must be > 0");
  }
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw ValidationError("lr_final_fraction must lie in (0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("adam epsilon must be > 0");
  if (!(omega > 0.0 && omega <= 1.0)) throw ValidationError("omega must lie in (0, 1]");
  if (!(std::isfinite(boundary_snap_weight) && boundary_snap_weight >= 0.0)) {
    throw ValidationError("boundary_snap_weight must be >= 0");
  }
  if (chamfer_sample_count && *chamfer_sample_count < 0) {
    throw ValidationError("chamfer_sample_count must be >= 0");
  }
}

std::vector<Vec3> arclength_match(Vertices loop_points, bool loop_closed,
                                  const BoundaryConstraint& polyline) {
  if (loop_points.size() < 2) throw ValidationError("arclength_match: loop needs >= 2 vertices");
  if (polyline.points.size() < 2) throw ValidationError("arclength_match: polyline needs >= 2 points");
  if (loop_closed != polyline.closed) {
    throw ValidationError("arclength_match: open/closed mismatch for loop '" + polyline.loop + "'");
  }
  const bool closed = loop_closed;
  const Vertices poly = polyline.points;
  const auto lcum = cumulative_length(loop_points, closed);
  const auto pcum = cumulative_length(poly, closed);
  const std::size_t n = loop_points.size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = lcum.back() > 0.0 ? lcum[i] / lcum.back()
                             : static_cast<double>(i) / static_cast<double>(closed ? n : n - 1);
  }
  const double ptotal = pcum.back();

  std::vector<Vec3> best, cand(n);
  double best_cost = std::numeric_limits<double>::infinity();
  const std::size_t starts = closed ? poly.size() : 1;
  for (std::size_t k = 0; k < starts; ++k) {
    const double offset = closed && ptotal > 0.0 ? pcum[k] / ptotal : 0.0;
    for (int dir : {1, -1}) {
      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double tau = closed ? offset + dir * s[i] : (dir > 0 ? s[i] : 1.0 - s[i]);
        cand[i] = point_at(poly, pcum, closed, tau);
        cost += (cand[i] - loop_points[i]).squaredNorm();
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = cand;
      }
    }
  }
  return best;
}

double BoundaryMatch::mean_distance(Vertices positions) const {
  if (vertices.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    sum += (positions[static_cast<std::size_t>(vertices[i])] - targets[i]).norm();
  }
  return sum / static_cast<double>(vertices.size());
}

BoundaryMatch match_boundary(const QuadMesh& mesh, Vertices positions,
                             const BoundaryConstraintSet& constraints) {
  BoundaryMatch out;
  for (const BoundaryConstraint& c : constraints) {
    const BoundaryLoop* loop = mesh.find_loop(c.loop);
    if (!loop) throw ValidationError("constraint references unknown loop '" + c.loop + "'");
    const auto pts = gather(positions, loop->vertices);
    const auto targets = arclength_match(pts, loop->closed, c);
    out.vertices.insert(out.vertices.end(), loop->vertices.begin(), loop->vertices.end());
    out.targets.insert(out.targets.end(), targets.begin(), targets.end());
  }
  return out;
}

AffineTransform solve_affine(Vertices source, Vertices target) {
  if (source.size() != target.size()) throw ShapeError("solve_affine: length mismatch");
  if (source.size() < 4) {
    throw DegenerateConstraintError("affine fit needs >= 4 correspondences",
                                    {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()});
  }
  const Vec3 cs = centroid(source);
  const Vec3 ct = centroid(target);
  Eigen::MatrixX3d X(source.size(), 3), Y(source.size(), 3);
  for (std::size_t i = 0; i < source.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = (source[i] - cs).transpose();
    Y.row(static_cast<Eigen::Index>(i)) = (target[i] - ct).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec3 sigma = svd.singularValues();
  const double tol = 1e-9 * std::max(sigma[0], 1e-300);
  std::vector<Vec3> deficient;
  for (int k = 0; k < 3; ++k) {
    if (!(sigma[k] > tol)) deficient.push_back(svd.matrixV().col(k));
  }
  if (!deficient.empty()) {
    throw DegenerateConstraintError(
        "boundary correspondences span only " + std::to_string(3 - deficient.size()) +
            " direction(s); the affine map is undetermined",
        deficient);
  }
  AffineTransform out;
  out.A = svd.solve(Y).transpose();
  out.t = ct - out.A * cs;
  if (!(std::abs(out.A.determinant()) > 1e-9) || !out.A.allFinite()) {
    throw DegenerateConstraintError("affine fit is singular (|det A| <= 1e-9)", {});
  }
  return out;
}

AffineFit fit_affine(const QuadMesh& templ, const BoundaryConstraintSet& constraints,
                     int max_rounds) {
  validate_constraints(templ, constraints);
  if (constraints.empty()) throw DegenerateConstraintError("no boundary constraints", {});
  AffineFit fit;

  // Start from loop centroids.
  std::vector<Vec3> src, dst;
  for (const BoundaryConstraint& c : constraints) {
    const BoundaryLoop* loop = templ.find_loop(c.loop);
    src.push_back(polyline_centroid(gather(templ.vertices, loop->vertices), loop->closed));
    dst.push_back(polyline_centroid(c.points, c.closed));
  }
  bool have_start = false;
  if (src.size() >= 4) {
    try {
      fit.transform = solve_affine(src, dst);
      have_start = true;
    } catch (const DegenerateConstraintError&) {
    }
  }
  if (!have_start) {
    Vec3 shift = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) shift += dst[i] - src[i];
    fit.transform = AffineTransform{Mat3::Identity(), shift / static_cast<double>(src.size())};
  }

  std::vector<int> boundary;
  for (const BoundaryConstraint& c : constraints) {
    const auto& v = templ.find_loop(c.loop)->vertices;
    boundary.insert(boundary.end(), v.begin(), v.end());
  }
  const std::vector<Vec3> source = gather(templ.vertices, boundary);
  const double scale = std::max(bounding_box(templ.vertices).diagonal(), 1.0);

  BoundaryMatch match;
  for (int round = 1; round <= max_rounds; ++round) {
    const auto moved = fit.transform.apply(templ.vertices);
    match = match_boundary(templ, moved, constraints);
    const AffineTransform next = solve_affine(source, match.targets);
    const double change = max_abs_diff(next, fit.transform);
    fit.transform = next;
    fit.rounds = round;
    if (change <= 1e-14 * scale) break;
  }
  const auto moved = fit.transform.apply(templ.vertices);
  match = match_boundary(templ, moved, constraints);
  double ss = 0.0;
  for (std::size_t i = 0; i < match.vertices.size(); ++i) {
    ss += (moved[static_cast<std::size_t>(match.vertices[i])] - match.targets[i]).squaredNorm();
  }
  fit.rms = match.vertices.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(match.vertices.size()));
  return fit;
}

std::vector<Vec3> relax_laplacian(Vertices vertices, const AdjacencyTable& adj,
                                  const std::vector<bool>& fixed, int iterations, double omega,
                                  std::vector<double>* trace) {
  if (adj.size() != vertices.size() || fixed.size() != vertices.size()) {
    throw ShapeError("relax_laplacian: size mismatch");
  }
  if (!(omega > 0.0 && omega <= 1.0)) throw ValidationError("relax_laplacian: omega must lie in (0, 1]");
  std::vector<Vec3> x(vertices.begin(), vertices.end());
  const std::size_t n = x.size();
  if (n == 0) return x;
  double current = loss_mc(x, adj).value;
  if (trace) trace->push_back(current);

  std::vector<Vec3> step(n, Vec3::Zero()), trial(n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      step[i].setZero();
      if (fixed[i] || adj.neighbors[i].empty()) continue;
      Vec3 mean = Vec3::Zero();
      for (int j : adj.neighbors[i]) mean += x[static_cast<std::size_t>(j)];
      step[i] = mean / static_cast<double>(adj.neighbors[i].size()) - x[i];
    }
    bool improved = false;
    // Halving down to omega * 2^-30 before giving up.
    double w = omega;
    for (int tries = 0; tries <= 30 && !improved; ++tries, w *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + w * step[i];
      const double value = loss_mc(trial, adj).value;
      if (value < current) {
        x.swap(trial);
        current = value;
        improved = true;
      }
    }
    if (!improved) break;
    if (trace) trace->push_back(current);
  }
  return x;
}

LossValue stage_loss(const StageProblem& p, Vertices x) {
  LossValue total =
      loss_chamfer_surface(x, p.quads, *p.target, p.target_samples, p.bidirectional);
  const std::size_t n = x.size();
  auto add = [&](const LossValue& term, double w) {
    total.value += w * term.value;
    total.skipped += term.skipped;
    for (std::size_t i = 0; i < n; ++i) total.gradient[i] += w * term.gradient[i];
  };
  const bool ref = !p.reference.empty();
  if (const double w = p.weights.a("mc"); w > 0.0) {
    if (ref) {
      std::vector<Vec3> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - p.reference[i];
      add(loss_mc(d, *p.adj), w);
    } else {
      add(loss_mc(x, *p.adj), w);
    }
  }
  if (const double w = p.weights.a("flatness"); w > 0.0) add(loss_flatness(p.quads, x), w);
  if (const double w = p.weights.a("aspect"); w > 0.0) add(loss_aspect(p.quads, x, p.reference), w);
  if (const double w = p.weights.a("corner"); w > 0.0) add(loss_corner(p.quads, x, p.reference), w);
  if (p.snap_weight > 0.0 && !p.snap.vertices.empty()) {
    const double s = p.snap_weight / static_cast<double>(p.snap.vertices.size());
    for (std::size_t k = 0; k < p.snap.vertices.size(); ++k) {
      const auto v = static_cast<std::size_t>(p.snap.vertices[k]);
      const Vec3 d = x[v] - p.snap.targets[k];
      total.value += s * d.squaredNorm();
      total.gradient[v] += 2.0 * s * d;
    }
  }
  return total;
}

std::vector<Vec3> optimize_stage(const StageProblem& problem, Vertices start,
                                 const AdamOptions& o, std::vector<double>* trace) {
  const std::size_t n = start.size();
  std::vector<Vec3> x(start.begin(), start.end());
  std::vector<Vec3> disp(n, Vec3::Zero()), m(n, Vec3::Zero()), v(n, Vec3::Zero());
  const bool masked = !problem.frozen.empty();
  if (masked && problem.frozen.size() != n) throw ShapeError("optimize_stage: frozen mask size");
  double b1t = 1.0, b2t = 1.0;
  std::vector<Vec3> last_good = x;
  for (int it = 0; it < o.iterations; ++it) {
    LossValue loss;
    try {
      loss = stage_loss(problem, x);
    } catch (const GeometryError& e) {
      // Steps that overflow the coordinates collapse the surface first.
      if (it == 0) throw;
      throw DivergenceError("geometry broke down at iteration " + std::to_string(it) + ": " + e.what(), it,
                            last_good);
    }
    bool finite = std::isfinite(loss.value) && all_finite(x);
    for (const Vec3& g : loss.gradient) finite = finite && g.allFinite();
    if (!finite) {
      throw DivergenceError("non-finite loss at iteration " + std::to_string(it), it, last_good);
    }
    last_good = x;
    if (trace) trace->push_back(loss.value);
    const double frac = o.iterations > 1 ? static_cast<double>(it) / (o.iterations - 1) : 0.0;
    const double lr = o.learning_rate * (1.0 - (1.0 - o.final_fraction) * frac);
    b1t *= o.beta1;
    b2t *= o.beta2;
    for (std::size_t i = 0; i < n; ++i) {
      if (masked && problem.frozen[i]) continue;
      Vec3 g = loss.gradient[i];
      for (int k = 0; k < 3; ++k) {
        if (std::abs(g[k]) < kGradientNoise) g[k] = 0.0;
      }
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g.cwiseProduct(g);
      const Vec3 mh = m[i] / (1.0 - b1t);
      const Vec3 vh = v[i] / (1.0 - b2t);
      disp[i] -= lr * mh.cwiseQuotient((vh.cwiseSqrt().array() + o.epsilon).matrix());
      x[i] = start[i] + disp[i];
    }
  }
  return x;
}

std::vector<Vec3> final_projection(Vertices vertices, const SurfaceIndex& target,
                                   ProjectionMode mode) {
  std::vector<Vec3> out;
  out.reserve(vertices.size());
  for (const Vec3& p : vertices) {
    if (mode == ProjectionMode::surface) {
      out.push_back(target.nearest(p).point);
    } else {
      out.push_back(target.vertices()[static_cast<std::size_t>(
          nearest_vertex(p, target.vertices()).index)]);
    }
  }
  return out;
}

FitResult run_pipeline(const QuadMesh& templ, const TriSurface& target,
                       const BoundaryConstraintSet& constraints, const FitConfig& config,
                       const QuadMesh* truth) {
  config.validate();
  if (const auto r = validate(templ); !r.ok()) throw ValidationError("invalid template: " + r.summary());
  if (templ.vertices.empty() || !(bounding_box(templ.vertices).diagonal() > 0.0)) {
    throw ValidationError("template vertices are coincident");
  }
  if (target.triangles.empty()) throw ValidationError("target surface is empty");
  if (const auto r = validate(target); !r.ok()) throw ValidationError("invalid target: " + r.summary());
  validate_constraints(templ, constraints);
  if (truth && !same_topology(templ, *truth)) {
    throw CorrespondenceError("ground truth does not share the template topology");
  }

  const AdjacencyTable adj = build_adjacency(templ);
  const SurfaceIndex index(target);
  FitResult result;
  FitReport& rep = result.report;

  // Step 1: affine alignment.
  std::vector<Vec3> x = templ.vertices;
  if (config.n0 > 0 && !constraints.empty()) {
    rep.affine = fit_affine(templ, constraints, config.n0);
    x = rep.affine.transform.apply(templ.vertices);
  }
  const std::vector<Vec3> aligned = x;
  const BoundaryMatch match = match_boundary(templ, aligned, constraints);
  rep.boundary_distance_after_affine = match.mean_distance(aligned);

  // Step 2: smoothing with a fixed boundary.
  x = relax_laplacian(x, adj, adj.boundary, config.n1, config.omega, &rep.relax_trace);

  // Steps 3 and 4 optimise a displacement field from the smoothed state.
  const double edge = mean_edge_length(aligned, templ.quads);
  rep.learning_rate_boundary = config.learning_rate_boundary.value_or(0.01 * edge);
  rep.learning_rate_interior = config.learning_rate_interior.value_or(0.01 * edge);
  const auto samples = static_cast<std::size_t>(
      config.chamfer_sample_count.value_or(4 * static_cast<int>(templ.vertices.size())));

  StageProblem problem;
  problem.quads = templ.quads;
  problem.adj = &adj;
  problem.target = &index;
  if (config.chamfer_bidirectional) {
    problem.target_samples = sample_surface(target.vertices, target.triangles, samples, config.seed);
  }
  problem.bidirectional = config.chamfer_bidirectional;
  problem.weights = config.weights;
  if (config.reference == RegularizerReference::template_shape) problem.reference = aligned;

  AdamOptions adam;
  adam.final_fraction = config.lr_final_fraction;
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.epsilon = config.adam_epsilon;

  // Step 3: boundary-constrained stage.
  problem.snap = match;
  problem.snap_weight = config.boundary_snap_weight;
  adam.iterations = config.n2;
  adam.learning_rate = rep.learning_rate_boundary;
  if (config.n2 > 0) x = optimize_stage(problem, x, adam, &rep.boundary_trace);
  rep.boundary_distance_after_boundary_stage = match.mean_distance(x);

  // Step 4: boundary placed on its targets and frozen; interior continues.
  if (config.n3 > 0) {
    for (std::size_t k = 0; k < match.vertices.size(); ++k) {
      x[static_cast<std::size_t>(match.vertices[k])] = match.targets[k];
    }
    problem.snap = {};
    problem.snap_weight = 0.0;
    problem.frozen = adj.boundary;
    adam.iterations = config.n3;
    adam.learning_rate = rep.learning_rate_interior;
    x = optimize_stage(problem, x, adam, &rep.interior_trace);
  }

  // Step 5: projection onto the target.
  x = final_projection(x, index, config.projection);
  double sum = 0.0;
  for (const Vec3& p : x) {
    const double d = index.nearest(p).distance;
    sum += d;
    rep.surface_distance_max = std::max(rep.surface_distance_max, d);
  }
  rep.surface_distance_mean = sum / static_cast<double>(x.size());

  rep.surface_chamfer_affine = quadfit::surface_chamfer(aligned, templ.quads, target);
  rep.surface_chamfer = quadfit::surface_chamfer(x, templ.quads, target);

  result.mesh = templ;
  result.mesh.vertices = std::move(x);
  rep.quality = quality_report(result.mesh);
  if (truth) {
    rep.metrics = evaluate(result.mesh, *truth);
    QuadMesh affine_mesh = templ;
    affine_mesh.vertices = aligned;
    rep.affine_metrics = evaluate(affine_mesh, *truth);
  }
  return result;
}

}  // namespace quadfit
