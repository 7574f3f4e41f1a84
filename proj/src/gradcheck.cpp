#include "quadfit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "quadfit/errors.hpp"
#include "quadfit/losses.hpp"
#include "quadfit/mesh.hpp"
#include "quadfit/spatial.hpp"
#include "quadfit/synth.hpp"

namespace quadfit {

namespace {

const std::vector<std::string> kNames = {
    "geom",   "mc",          "chamfer",  "normal",          "edge",     "laplacian",
    "flatness", "aspect",    "aspect_ref", "corner",        "corner_ref", "chamfer_surface",
    "training", "additive",  "multiplicative"};

struct Problem {
  QuadMesh mesh;
  AdjacencyTable adj;
  std::vector<Vec3> x;
  std::vector<Vec3> other;      // correspondence partner / reference shape
  std::vector<Vec3> points;     // free target point set
  TriSurface target;
  SurfaceIndex index;
  std::vector<Vec3> samples;
  double mu = 1.0;
  std::array<double, 4> lambda{1.0, 1.0, 1.0, 1.0};
  std::string desc;
};

using Rng = std::mt19937_64;

std::vector<Vec3> jitter(const std::vector<Vec3>& v, Rng& rng, double a, double az) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> out = v;
  for (Vec3& p : out) {
    p.x() += a * u(rng);
    p.y() += a * u(rng);
    p.z() += az * u(rng);
  }
  return out;
}

Problem draw(int index, Rng& rng) {
  Problem p;
  if (index % 6 == 5) {
    p.mesh = make_tube(6, 3, 2.0, 3.0);
    p.desc = "tube 6x3";
  } else {
    const int n = 4 + index % 5;
    p.mesh = make_grid(n, n, 1.0);
    p.desc = "grid " + std::to_string(n) + "x" + std::to_string(n);
  }
  p.adj = build_adjacency(p.mesh);
  p.x = jitter(p.mesh.vertices, rng, 0.2, 0.3);
  p.other = jitter(p.mesh.vertices, rng, 0.2, 0.3);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Box box = bounding_box(p.x);
  const std::size_t npts = p.x.size() * 3 / 2;
  for (std::size_t i = 0; i < npts; ++i) {
    Vec3 q;
    for (int k = 0; k < 3; ++k) {
      q[k] = 0.5 * (box.lo[k] + box.hi[k]) + (0.5 * (box.hi[k] - box.lo[k]) + 0.5) * u(rng);
    }
    p.points.push_back(q);
  }

  p.target.vertices = jitter(p.mesh.vertices, rng, 0.2, 0.3);
  for (Vec3& v : p.target.vertices) v.z() += 0.2;
  p.target.triangles = triangulate(p.mesh.quads);
  p.target.vertex_normals = vertex_normals(p.target.vertices, p.target.triangles);
  p.index = SurfaceIndex(p.target);
  p.samples = sample_surface(p.target.vertices, p.target.triangles, 2 * p.x.size(), rng());
  p.mu = auto_edge_mu(p.x, p.adj);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  for (double& l : p.lambda) l = w(rng);
  return p;
}

// Distance gap between the nearest and the runner-up point.
double nearest_gap(const Vec3& q, Vertices set) {
  double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
  for (const Vec3& s : set) {
    const double d = (s - q).norm();
    if (d < d1) {
      d2 = d1;
      d1 = d;
    } else if (d < d2) {
      d2 = d;
    }
  }
  return d2 - d1;
}

// Gap between the closest triangle and the closest one whose foot point is
// elsewhere (triangles sharing the foot point on an edge or corner agree).
double surface_gap(const Vec3& q, Vertices verts, std::span<const Tri> tris) {
  std::vector<ClosestPoint> cps;
  cps.reserve(tris.size());
  for (const Tri& t : tris) cps.push_back(closest_point_on_triangle(q, verts[t[0]], verts[t[1]], verts[t[2]]));
  const auto best = std::min_element(cps.begin(), cps.end(), [](const ClosestPoint& a, const ClosestPoint& b) {
    return a.distance < b.distance;
  });
  double second = std::numeric_limits<double>::infinity();
  for (const ClosestPoint& c : cps) {
    if ((c.point - best->point).norm() > 1e-9) second = std::min(second, c.distance);
  }
  return second - best->distance;
}

// Smallest distance of the draw to a point where `loss` is not smooth.
double kink_distance(const std::string& loss, const Problem& p) {
  double gap = std::numeric_limits<double>::infinity();
  if (loss == "chamfer") {
    for (const Vec3& q : p.x) gap = std::min(gap, nearest_gap(q, p.points));
    for (const Vec3& q : p.points) gap = std::min(gap, nearest_gap(q, p.x));
  } else if (loss == "normal") {
    for (const Vec3& q : p.x) gap = std::min(gap, nearest_gap(q, p.target.vertices));
  } else if (loss == "edge") {
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      for (int j : p.adj.neighbors[i]) {
        const double len = (p.x[static_cast<std::size_t>(j)] - p.x[i]).norm();
        // |len^2 - mu^2| moves by about 2 len per unit of length change.
        gap = std::min(gap, std::abs(len * len - p.mu * p.mu) / (2.0 * std::max(len, 1e-12)));
      }
    }
  } else if (loss == "flatness") {
    for (const Quad& q : p.mesh.quads) {
      Vec3 c = Vec3::Zero();
      for (int v : q) c += p.x[static_cast<std::size_t>(v)];
      c *= 0.25;
      Mat3 s = Mat3::Zero();
      for (int v : q) {
        const Vec3 d = p.x[static_cast<std::size_t>(v)] - c;
        s += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
      const Vec3 ev = eig.eigenvalues();
      gap = std::min(gap, std::sqrt(ev[1]) - std::sqrt(ev[0]));
    }
  } else if (loss == "aspect") {
    for (const Quad& q : p.mesh.quads) {
      auto len = [&](int a, int b) {
        return (p.x[static_cast<std::size_t>(q[b])] - p.x[static_cast<std::size_t>(q[a])]).norm();
      };
      gap = std::min(gap, std::abs(0.5 * (len(0, 1) + len(3, 2)) - 0.5 * (len(1, 2) + len(0, 3))));
    }
  } else if (loss == "chamfer_surface") {
    for (const Vec3& q : p.x) gap = std::min(gap, surface_gap(q, p.target.vertices, p.target.triangles));
    const auto tris = triangulate(p.mesh.quads);
    for (const Vec3& q : p.samples) gap = std::min(gap, surface_gap(q, p.x, tris));
  }
  return gap;
}

std::vector<LossValue> composition_terms(const Problem& p, Vertices x) {
  return {loss_geom(x, p.other), loss_mc(x, p.adj), loss_laplacian(x, p.adj),
          loss_corner(p.mesh.quads, x)};
}

std::function<LossValue(Vertices)> evaluator(const std::string& loss, const Problem& p) {
  if (loss == "geom") return [&p](Vertices x) { return loss_geom(x, p.other); };
  if (loss == "mc") return [&p](Vertices x) { return loss_mc(x, p.adj); };
  if (loss == "chamfer") return [&p](Vertices x) { return loss_chamfer(x, p.points); };
  if (loss == "normal") {
    return [&p](Vertices x) { return loss_normal(x, std::span<const Quad>(p.mesh.quads), p.target); };
  }
  if (loss == "edge") return [&p](Vertices x) { return loss_edge(x, p.adj, p.mu); };
  if (loss == "laplacian") return [&p](Vertices x) { return loss_laplacian(x, p.adj); };
  if (loss == "flatness") return [&p](Vertices x) { return loss_flatness(p.mesh.quads, x); };
  if (loss == "aspect") return [&p](Vertices x) { return loss_aspect(p.mesh.quads, x); };
  if (loss == "aspect_ref") return [&p](Vertices x) { return loss_aspect(p.mesh.quads, x, p.other); };
  if (loss == "corner") return [&p](Vertices x) { return loss_corner(p.mesh.quads, x); };
  if (loss == "corner_ref") return [&p](Vertices x) { return loss_corner(p.mesh.quads, x, p.other); };
  if (loss == "chamfer_surface") {
    return [&p](Vertices x) { return loss_chamfer_surface(x, p.mesh.quads, p.index, p.samples, true); };
  }
  if (loss == "training") return [&p](Vertices x) { return training_loss(x, p.other, p.adj); };
  if (loss == "additive") {
    return [&p](Vertices x) { return compose_additive(composition_terms(p, x), p.lambda); };
  }
  if (loss == "multiplicative") {
    return [&p](Vertices x) { return compose_multiplicative(composition_terms(p, x), p.lambda); };
  }
  throw ConfigError("gradcheck: unknown loss " + loss);
}

double inf_norm(const std::vector<Vec3>& g) {
  double m = 0.0;
  for (const Vec3& v : g) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

GradcheckCase check_case(const std::string& loss, int index, const GradcheckOptions& o) {
  GradcheckCase c;
  c.loss = loss;
  c.index = index;
  const double reach = o.margin + 2.0 * o.h;
  for (int attempt = 0; attempt <= o.max_redraws; ++attempt) {
    std::seed_seq seq{o.seed, static_cast<std::uint64_t>(
                          std::find(kNames.begin(), kNames.end(), loss) - kNames.begin()),
                      static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(attempt)};
    Rng rng(seq);
    const Problem p = draw(index, rng);
    if (kink_distance(loss, p) <= reach) {
      ++c.redraws;
      continue;
    }
    c.mesh = p.desc;
    c.vertices = static_cast<int>(p.x.size());
    const auto f = evaluator(loss, p);
    LossValue analytic = f(p.x);
    if (loss == o.corrupt && !analytic.gradient.empty()) {
      analytic.gradient[0] += Vec3::Constant(0.01 * inf_norm(analytic.gradient) + 1e-3);
    }
    const auto fd = finite_difference_gradient([&f](Vertices x) { return f(x).value; }, p.x, o.h);
    std::vector<Vec3> diff(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = analytic.gradient[i] - fd[i];
    const double scale = std::max({inf_norm(analytic.gradient), inf_norm(fd), 1e-8});
    c.value = analytic.value;
    c.error = inf_norm(diff) / scale;
    const bool sane = std::isfinite(analytic.value) && analytic.value >= 0.0;
    c.passed = sane && c.error <= o.tolerance;
    if (!sane) c.note = "invalid loss value";
    return c;
  }
  c.note = "no draw clear of kinks";
  return c;
}

}  // namespace

std::vector<std::string> gradcheck_loss_names() { return kNames; }

bool GradcheckResult::passed() const {
  if (cases.empty()) return false;
  return std::all_of(cases.begin(), cases.end(), [](const GradcheckCase& c) { return c.passed; });
}

GradcheckResult run_gradcheck(const GradcheckOptions& o) {
  if (o.cases_per_loss < 1) throw ConfigError("gradcheck: cases_per_loss must be positive");
  if (!(o.h > 0.0) || !(o.tolerance > 0.0) || !(o.margin >= 0.0) || o.max_redraws < 0) {
    throw ConfigError("gradcheck: step, tolerance and margin must be positive");
  }
  const std::vector<std::string> losses = o.losses.empty() ? kNames : o.losses;
  for (const std::string& l : losses) {
    if (std::find(kNames.begin(), kNames.end(), l) == kNames.end()) {
      throw ConfigError("gradcheck: unknown loss " + l);
    }
  }
  if (!o.corrupt.empty() && std::find(kNames.begin(), kNames.end(), o.corrupt) == kNames.end()) {
    throw ConfigError("gradcheck: unknown loss " + o.corrupt);
  }
  GradcheckResult r;
  for (const std::string& l : losses) {
    for (int i = 0; i < o.cases_per_loss; ++i) r.cases.push_back(check_case(l, i, o));
  }
  return r;
}

}  // namespace quadfit
