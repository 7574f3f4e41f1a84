#include <doctest.h>

#include <cmath>
#include <random>

#include "quadfit/errors.hpp"
#include "quadfit/fitter.hpp"
#include "quadfit/synth.hpp"
#include "support.hpp"

using namespace quadfit;

namespace {

TemplateSpec small_spec() {
  TemplateSpec s;
  s.circumferential = 18;
  s.axial = 5;
  s.leaflet_radial = 3;
  return s;
}

BoundaryConstraintSet loops_as_constraints(const QuadMesh& m, const AffineTransform& T = {}) {
  BoundaryConstraintSet out;
  for (const BoundaryLoop& loop : m.boundary_loops) {
    BoundaryConstraint c{loop.name, loop.closed, {}};
    for (int v : loop.vertices) c.points.push_back(T(m.vertices[v]));
    out.push_back(c);
  }
  return out;
}

TriSurface as_surface(const QuadMesh& m) {
  TriSurface s{m.vertices, triangulate(m.quads), {}};
  s.vertex_normals = vertex_normals(s.vertices, s.triangles);
  return s;
}

Mat3 random_affine(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Mat3 A;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) A(i, j) = (i == j ? 1.0 : 0.0) + 0.6 * u(rng);
    const Eigen::JacobiSVD<Mat3> svd(A);
    const auto sv = svd.singularValues();
    if (A.determinant() > 0.0 && sv(0) / sv(2) < 10.0) return A;
  }
}

double mc_of(Vertices v, const AdjacencyTable& adj) { return loss_mc(v, adj).value; }

}  // namespace

TEST_CASE("affine solve and fit") {
  const QuadMesh t = gen_template(TemplateSpec{});

  SUBCASE("identity") {
    const AffineFit f = fit_affine(t, loops_as_constraints(t));
    CHECK((f.transform.A - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(f.transform.t.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(f.rms <= 1e-9);
  }
  SUBCASE("scale and translation") {
    AffineTransform T;
    T.A = 2.0 * Mat3::Identity();
    T.t = Vec3(5, 0, 0);
    const AffineFit f = fit_affine(t, loops_as_constraints(t, T));
    CHECK((f.transform.A - T.A).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((f.transform.t - T.t).cwiseAbs().maxCoeff() <= 1e-6);
  }
  SUBCASE("random well-conditioned affines") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int k = 0; k < 10; ++k) {
      AffineTransform T;
      T.A = random_affine(rng);
      T.t = Vec3(u(rng), u(rng), u(rng));
      const AffineFit f = fit_affine(t, loops_as_constraints(t, T));
      CHECK((f.transform.A - T.A).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK((f.transform.t - T.t).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
  SUBCASE("coplanar sources are rejected") {
    const QuadMesh g = make_grid(4, 4);
    CHECK_THROWS_AS(solve_affine(g.vertices, g.vertices), DegenerateConstraintError);
    CHECK_THROWS_AS(solve_affine(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}, std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}),
                    DegenerateConstraintError);
  }
  SUBCASE("solve is exact on a known map") {
    const auto src = test::random_points(30, 4, 5.0);
    std::mt19937_64 rng(5);
    AffineTransform T;
    T.A = random_affine(rng);
    T.t = Vec3(1, -2, 3);
    const AffineTransform got = solve_affine(src, T.apply(src));
    CHECK((got.A - T.A).norm() < 1e-10);
    CHECK((got.t - T.t).norm() < 1e-10);
  }
}

TEST_CASE("arc-length matching") {
  SUBCASE("polyline equal to the loop") {
    const QuadMesh g = make_grid(4, 4);
    const BoundaryLoop& loop = g.boundary_loops.front();
    std::vector<Vec3> pts;
    for (int v : loop.vertices) pts.push_back(g.vertices[v]);
    const auto m = arclength_match(pts, true, BoundaryConstraint{loop.name, true, pts});
    CHECK(test::max_abs_diff(m, pts) < 1e-12);
  }
  SUBCASE("dense rotated circle") {
    std::vector<Vec3> loop;
    for (int i = 0; i < 16; ++i) loop.emplace_back(std::cos(2 * M_PI * i / 16), std::sin(2 * M_PI * i / 16), 0);
    BoundaryConstraint c{"ring", true, {}};
    for (int i = 0; i < 64; ++i) {
      const double a = 2 * M_PI * i / 64 + M_PI / 2;
      c.points.emplace_back(std::cos(a), std::sin(a), 0);
    }
    auto m = arclength_match(loop, true, c);
    for (std::size_t i = 0; i < loop.size(); ++i) CHECK((m[i] - loop[i]).norm() < 1e-2);
    std::reverse(c.points.begin(), c.points.end());
    m = arclength_match(loop, true, c);
    for (std::size_t i = 0; i < loop.size(); ++i) CHECK((m[i] - loop[i]).norm() < 1e-2);
  }
  SUBCASE("reversed open segment") {
    std::vector<Vec3> loop;
    for (int i = 0; i <= 4; ++i) loop.emplace_back(0.25 * i, 0, 0);
    const BoundaryConstraint c{"seg", false, {{1, 0, 0}, {0, 0, 0}}};
    const auto m = arclength_match(loop, false, c);
    CHECK(test::max_abs_diff(m, loop) < 1e-15);
  }
  SUBCASE("open and closed disagree") {
    const std::vector<Vec3> loop = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
    CHECK_THROWS_AS(arclength_match(loop, true, BoundaryConstraint{"x", false, loop}), ValidationError);
    const QuadMesh g = make_grid(3, 3);
    BoundaryConstraintSet bad = loops_as_constraints(g);
    bad[0].closed = false;
    CHECK_THROWS_AS(validate_constraints(g, bad), ValidationError);
    bad = loops_as_constraints(g);
    bad[0].loop = "nope";
    CHECK_THROWS_AS(validate_constraints(g, bad), ValidationError);
    bad = loops_as_constraints(g);
    bad[0].points.resize(1);
    CHECK_THROWS_AS(validate_constraints(g, bad), ValidationError);
  }
}

TEST_CASE("laplacian relaxation") {
  const QuadMesh g = make_grid(6, 6);
  const AdjacencyTable adj = build_adjacency(g);

  SUBCASE("uniform grid is a fixed point") {
    const auto r = relax_laplacian(g.vertices, adj, adj.boundary, 20);
    CHECK(test::max_abs_diff(r, g.vertices) < 1e-15);
  }
  SUBCASE("zero rounds is the identity") {
    const auto p = test::jittered(g.vertices, 1, 0.3);
    CHECK(test::max_abs_diff(relax_laplacian(p, adj, adj.boundary, 0), p) == 0.0);
  }
  SUBCASE("one displaced interior vertex") {
    std::vector<Vec3> p = g.vertices;
    p[14] += Vec3(0.2, -0.1, 0.5);
    std::vector<double> trace;
    const auto r = relax_laplacian(p, adj, adj.boundary, 10, 0.5, &trace);
    CHECK((r[14] - g.vertices[14]).norm() < (p[14] - g.vertices[14]).norm());
    CHECK(mc_of(r, adj) < mc_of(p, adj));
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    for (std::size_t i = 0; i < adj.size(); ++i) {
      if (adj.boundary[i]) CHECK(r[i] == p[i]);
    }
  }
  SUBCASE("monotone on the template for several factors") {
    const QuadMesh t = gen_template(small_spec());
    const AdjacencyTable ta = build_adjacency(t);
    const auto p = test::jittered(t.vertices, 3, 0.5);
    for (double omega : {0.1, 0.5, 1.0}) {
      std::vector<double> trace;
      relax_laplacian(p, ta, ta.boundary, 30, omega, &trace);
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    }
  }
}

TEST_CASE("stage optimization") {
  SUBCASE("already optimal") {
    const QuadMesh t = gen_template(small_spec());
    const AdjacencyTable adj = build_adjacency(t);
    const TriSurface surf = as_surface(t);
    const SurfaceIndex index(surf);
    StageProblem pb;
    pb.quads = t.quads;
    pb.adj = &adj;
    pb.target = &index;
    pb.target_samples = surf.vertices;
    pb.reference = t.vertices;
    pb.frozen = adj.boundary;
    AdamOptions opt;
    opt.iterations = 50;
    opt.learning_rate = 0.01;
    std::vector<double> trace;
    const auto x = optimize_stage(pb, t.vertices, opt, &trace);
    REQUIRE(trace.size() >= 50);
    for (double v : trace) CHECK(std::abs(v - trace.front()) <= 1e-8);
    CHECK(test::max_abs_diff(x, t.vertices) < 1e-4);
  }
  SUBCASE("one free vertex lands on its plane projection") {
    const QuadMesh g = make_grid(3, 3);
    const AdjacencyTable adj = build_adjacency(g);
    const TriSurface plane = as_surface(make_grid(3, 3));
    const SurfaceIndex index(plane);
    std::vector<Vec3> start = g.vertices;
    start[4] = Vec3(1.1, 0.9, 0.5);
    StageProblem pb;
    pb.quads = g.quads;
    pb.adj = &adj;
    pb.target = &index;
    pb.target_samples = plane.vertices;
    pb.bidirectional = false;
    pb.weights.alpha = {{"mc", 0.0}, {"flatness", 0.0}, {"aspect", 0.0}, {"corner", 0.0}};
    pb.frozen.assign(9, true);
    pb.frozen[4] = false;
    AdamOptions opt;
    opt.iterations = 1500;
    opt.learning_rate = 0.01;
    opt.final_fraction = 0.01;
    const auto x = optimize_stage(pb, start, opt);
    CHECK((x[4] - Vec3(1.1, 0.9, 0.0)).norm() < 1e-3);
    for (int i = 0; i < 9; ++i) {
      if (i != 4) CHECK(x[i] == start[i]);
    }
  }
  SUBCASE("runaway steps raise a divergence error") {
    const QuadMesh g = make_grid(3, 3);
    const AdjacencyTable adj = build_adjacency(g);
    const TriSurface plane = as_surface(g);
    const SurfaceIndex index(plane);
    std::vector<Vec3> start = g.vertices;
    start[4].z() = 1.0;
    StageProblem pb;
    pb.quads = g.quads;
    pb.adj = &adj;
    pb.target = &index;
    pb.target_samples = plane.vertices;
    pb.frozen.assign(9, false);
    AdamOptions opt;
    opt.iterations = 20;
    opt.learning_rate = 1e300;
    CHECK_THROWS_AS(optimize_stage(pb, start, opt), DivergenceError);
  }
}

TEST_CASE("final projection") {
  const QuadMesh t = gen_template(small_spec());
  const TriSurface surf = as_surface(t);
  const SurfaceIndex index(surf);
  CHECK(test::max_abs_diff(final_projection(t.vertices, index, ProjectionMode::surface), t.vertices) < 1e-12);

  const QuadMesh g = make_grid(4, 4);
  const SurfaceIndex plane(as_surface(g));
  const std::vector<Vec3> above = {{1.3, 1.7, 1.0}};
  const auto on = final_projection(above, plane, ProjectionMode::surface);
  CHECK((on[0] - Vec3(1.3, 1.7, 0.0)).norm() < 1e-12);
  const auto snapped = final_projection(above, plane, ProjectionMode::vertex);
  CHECK((snapped[0] - Vec3(1.0, 2.0, 0.0)).norm() < 1e-12);

  const auto p = test::jittered(t.vertices, 6, 1.0);
  const auto once = final_projection(p, index, ProjectionMode::surface);
  const auto twice = final_projection(once, index, ProjectionMode::surface);
  CHECK(test::max_abs_diff(once, twice) <= 1e-12);
  for (const Vec3& q : once) CHECK(index.nearest(q).distance <= 1e-9);
}

TEST_CASE("pipeline") {
  const QuadMesh t = gen_template(small_spec());

  SUBCASE("all stages off reduces to projection") {
    FitConfig cfg;
    cfg.n0 = cfg.n1 = cfg.n2 = cfg.n3 = 0;
    WarpSpec w;
    w.kind = WarpKind::radial_bulge;
    w.bulge = 0.1;
    const SyntheticCase c = gen_target(t, w, 2);
    const FitResult r = run_pipeline(t, c.target, c.constraints, cfg);
    const auto expected = final_projection(t.vertices, SurfaceIndex(c.target), ProjectionMode::surface);
    CHECK(test::max_abs_diff(r.mesh.vertices, expected) == 0.0);
    CHECK(same_topology(r.mesh, t));
  }
  SUBCASE("self fit") {
    const SyntheticCase c = gen_target(t, WarpSpec{}, 3);
    const FitResult r = run_pipeline(t, c.target, c.constraints, FitConfig{}, &c.truth);
    CHECK(same_topology(r.mesh, t));
    CHECK(appd(r.mesh, t) <= 1e-3);
    CHECK(r.report.quality.inverted == 0);
    REQUIRE(r.report.metrics.has_value());
    CHECK(r.report.metrics->regions.at(Region::whole).appd == doctest::Approx(appd(r.mesh, t)));
  }
  SUBCASE("warped fit keeps topology and is deterministic") {
    WarpSpec w;
    w.kind = WarpKind::composite;
    w.seed = 2;
    const SyntheticCase c = gen_target(t, w, 2);
    FitConfig cfg;
    cfg.n2 = 120;
    cfg.n3 = 120;
    const FitResult a = run_pipeline(t, c.target, c.constraints, cfg, &c.truth);
    const FitResult b = run_pipeline(t, c.target, c.constraints, cfg, &c.truth);
    CHECK(same_topology(a.mesh, t));
    CHECK(test::max_abs_diff(a.mesh.vertices, b.mesh.vertices) == 0.0);
    CHECK(a.report.boundary_trace == b.report.boundary_trace);
    CHECK(a.report.boundary_distance_after_boundary_stage <= a.report.boundary_distance_after_affine);
    CHECK(a.report.surface_chamfer < a.report.surface_chamfer_affine);
    CHECK(a.report.surface_distance_max <= 1e-9);
    CHECK(a.report.quality.inverted == 0);
    for (double v : a.report.relax_trace) CHECK(std::isfinite(v));
    for (std::size_t i = 1; i < a.report.relax_trace.size(); ++i) {
      CHECK(a.report.relax_trace[i] <= a.report.relax_trace[i - 1]);
    }
    CHECK(a.report.boundary_trace.size() == 120);
    CHECK(a.report.interior_trace.size() == 120);
  }
  SUBCASE("bad inputs are rejected before any work") {
    FitConfig cfg;
    cfg.n2 = -1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = FitConfig{};
    cfg.omega = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = FitConfig{};
    cfg.learning_rate_boundary = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    const SyntheticCase c = gen_target(t, WarpSpec{}, 2);
    CHECK_THROWS_AS(run_pipeline(t, TriSurface{}, c.constraints, FitConfig{}), ValidationError);
    QuadMesh collapsed = t;
    for (Vec3& p : collapsed.vertices) p = Vec3::Zero();
    CHECK_THROWS_AS(run_pipeline(collapsed, c.target, c.constraints, FitConfig{}), ValidationError);
  }
}
