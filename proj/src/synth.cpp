#include "quadfit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>

#include "quadfit/errors.hpp"
#include "quadfit/spatial.hpp"

namespace quadfit {

namespace {

constexpr double kPi = std::numbers::pi;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

// Names loops returned by extract_boundary_loops using a classifier that
// maps a loop to its name, then orders them by `order`.
void name_loops(QuadMesh& mesh, const std::vector<std::string>& order,
                const std::function<std::string(const BoundaryLoop&)>& classify) {
  auto loops = extract_boundary_loops(mesh);
  for (auto& loop : loops) loop.name = classify(loop);
  std::vector<BoundaryLoop> sorted;
  for (const auto& name : order) {
    for (auto& loop : loops) {
      if (loop.name == name) sorted.push_back(loop);
    }
  }
  if (sorted.size() != loops.size()) throw TopologyError("unexpected boundary loop structure");
  mesh.boundary_loops = std::move(sorted);
}

struct Refinement {
  TriSurface surface;
  int n = 1;
  // Undirected edge (lo, hi) -> index of its first interior point, ordered lo -> hi.
  std::map<std::pair<int, int>, int> edge_start;

  // Point s (0..n) along the directed edge p -> q.
  int edge_point(int p, int q, int s) const {
    if (s == 0) return p;
    if (s == n) return q;
    const auto key = std::minmax(p, q);
    const int start = edge_start.at({key.first, key.second});
    return p < q ? start + s - 1 : start + (n - s) - 1;
  }
};

Refinement refine(const QuadMesh& mesh, int level) {
  Refinement r;
  r.n = 1 << level;
  const int n = r.n;
  auto& verts = r.surface.vertices;
  verts = mesh.vertices;
  for (const auto& e : unique_edges(mesh.quads)) {
    r.edge_start[{e[0], e[1]}] = static_cast<int>(verts.size());
    const Vec3& a = mesh.vertices[e[0]];
    const Vec3& b = mesh.vertices[e[1]];
    for (int s = 1; s < n; ++s) verts.push_back(a + (static_cast<double>(s) / n) * (b - a));
  }
  std::vector<int> grid(static_cast<std::size_t>((n + 1) * (n + 1)));
  auto at = [&](int u, int v) -> int& { return grid[static_cast<std::size_t>(v * (n + 1) + u)]; };
  for (const Quad& q : mesh.quads) {
    const Vec3 &a = mesh.vertices[q[0]], &b = mesh.vertices[q[1]], &c = mesh.vertices[q[2]],
               &d = mesh.vertices[q[3]];
    for (int s = 0; s <= n; ++s) {
      at(s, 0) = r.edge_point(q[0], q[1], s);
      at(n, s) = r.edge_point(q[1], q[2], s);
      at(s, n) = r.edge_point(q[3], q[2], s);
      at(0, s) = r.edge_point(q[0], q[3], s);
    }
    for (int v = 1; v < n; ++v) {
      for (int u = 1; u < n; ++u) {
        const double s = static_cast<double>(u) / n, t = static_cast<double>(v) / n;
        at(u, v) = static_cast<int>(verts.size());
        verts.push_back((1 - s) * (1 - t) * a + s * (1 - t) * b + s * t * c + (1 - s) * t * d);
      }
    }
    for (int v = 0; v < n; ++v) {
      for (int u = 0; u < n; ++u) {
        const int i0 = at(u, v), i1 = at(u + 1, v), i2 = at(u + 1, v + 1), i3 = at(u, v + 1);
        r.surface.triangles.push_back({i0, i1, i2});
        r.surface.triangles.push_back({i0, i2, i3});
      }
    }
  }
  return r;
}

}  // namespace

void TemplateSpec::validate() const {
  if (!positive_finite(radius) || !positive_finite(height)) {
    throw ValidationError("template radius and height must be > 0");
  }
  if (circumferential < 12 || circumferential % 6 != 0) {
    throw ValidationError("template.circumferential must be a multiple of 6 and >= 12");
  }
  if (axial < 3) throw ValidationError("template.axial must be >= 3");
  if (leaflet_radial < 3) throw ValidationError("template.leaflet_radial must be >= 3");
  if (leaflet_angular && *leaflet_angular != derived_angular()) {
    throw ValidationError("template.leaflet_angular must equal circumferential / 3 - 2 = " +
                          std::to_string(derived_angular()));
  }
  if (axial - 1 - derived_angular() / 2 < 1) {
    throw ValidationError("template.axial too small: hinge needs axial >= circumferential / 6 + 1");
  }
}

QuadMesh gen_template(const TemplateSpec& spec) {
  spec.validate();
  const int nc = spec.circumferential, na = spec.axial;
  const int m = nc / 3, a = m - 2, half = a / 2, r = spec.leaflet_radial;
  const int k_top = na - 1;

  QuadMesh mesh;
  auto wall = [&](int i, int k) { return k * nc + ((i % nc) + nc) % nc; };
  for (int k = 0; k <= na; ++k) {
    for (int i = 0; i < nc; ++i) {
      const double phi = 2.0 * kPi * i / nc;
      mesh.vertices.emplace_back(spec.radius * std::cos(phi), spec.radius * std::sin(phi),
                                 spec.height * k / na);
    }
  }
  for (int k = 0; k < na; ++k) {
    for (int i = 0; i < nc; ++i) {
      mesh.quads.push_back({wall(i, k), wall(i + 1, k), wall(i + 1, k + 1), wall(i, k + 1)});
      mesh.labels.push_back(Component::wall);
    }
  }
  const int wall_count = static_cast<int>(mesh.vertices.size());

  const double z_apex = spec.height * (2.0 * k_top - half) / (2.0 * na);
  const Vec3 apex(0.0, 0.0, z_apex);
  for (int l = 0; l < 3; ++l) {
    std::vector<int> hinge;
    for (int j = 0; j <= a; ++j) hinge.push_back(wall(l * m + 1 + j, k_top - std::min(j, a - j)));

    // Geometric row spacing: each step toward the apex roughly matches the
    // shrinking row width.
    double chord = 0.0, reach = 0.0;
    for (int j = 0; j < a; ++j) chord += (mesh.vertices[hinge[j + 1]] - mesh.vertices[hinge[j]]).norm();
    for (int h : hinge) reach += (apex - mesh.vertices[h]).norm();
    const double q = std::min(0.3, (chord / a) / (reach / (a + 1)));

    const int base = static_cast<int>(mesh.vertices.size());
    for (int s = 1; s <= r; ++s) {
      const double t = 1.0 - std::pow(1.0 - q, s);
      for (int j = 0; j <= a; ++j) {
        const Vec3& h = mesh.vertices[hinge[j]];
        mesh.vertices.push_back(h + t * (apex - h));
      }
    }
    auto node = [&](int j, int s) { return s == 0 ? hinge[j] : base + (s - 1) * (a + 1) + j; };
    const Component label = kComponents[static_cast<std::size_t>(l + 1)];
    for (int s = 0; s < r; ++s) {
      for (int j = 0; j < a; ++j) {
        mesh.quads.push_back({node(j, s), node(j + 1, s), node(j + 1, s + 1), node(j, s + 1)});
        mesh.labels.push_back(label);
      }
    }
    mesh.landmarks["H" + std::to_string(l)] = hinge[static_cast<std::size_t>(half)];
  }
  mesh.landmarks["C01"] = wall(m, k_top);
  mesh.landmarks["C12"] = wall(2 * m, k_top);
  mesh.landmarks["C20"] = wall(0, k_top);

  const int per_leaflet = r * (a + 1);
  name_loops(mesh, {"wall_top", "wall_bottom", "leaflet0_rim", "leaflet1_rim", "leaflet2_rim"},
             [&](const BoundaryLoop& loop) -> std::string {
               for (int v : loop.vertices) {
                 if (v >= wall_count) {
                   return "leaflet" + std::to_string((v - wall_count) / per_leaflet) + "_rim";
                 }
               }
               return loop.vertices.front() / nc == na ? "wall_top" : "wall_bottom";
             });
  return mesh;
}

QuadMesh make_grid(int nx, int ny, double spacing) {
  if (nx < 2 || ny < 2 || !positive_finite(spacing)) throw ValidationError("make_grid: bad size");
  QuadMesh mesh;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) mesh.vertices.emplace_back(i * spacing, j * spacing, 0.0);
  }
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int v = j * nx + i;
      mesh.quads.push_back({v, v + 1, v + 1 + nx, v + nx});
      mesh.labels.push_back(Component::wall);
    }
  }
  name_loops(mesh, {"boundary"}, [](const BoundaryLoop&) { return std::string("boundary"); });
  return mesh;
}

QuadMesh make_tube(int nc, int na, double radius, double height) {
  if (nc < 3 || na < 1 || !positive_finite(radius) || !positive_finite(height)) {
    throw ValidationError("make_tube: bad size");
  }
  QuadMesh mesh;
  for (int k = 0; k <= na; ++k) {
    for (int i = 0; i < nc; ++i) {
      const double phi = 2.0 * kPi * i / nc;
      mesh.vertices.emplace_back(radius * std::cos(phi), radius * std::sin(phi), height * k / na);
    }
  }
  for (int k = 0; k < na; ++k) {
    for (int i = 0; i < nc; ++i) {
      const int i1 = (i + 1) % nc;
      mesh.quads.push_back({k * nc + i, k * nc + i1, (k + 1) * nc + i1, (k + 1) * nc + i});
      mesh.labels.push_back(Component::wall);
    }
  }
  name_loops(mesh, {"top", "bottom"}, [&](const BoundaryLoop& loop) {
    return std::string(loop.vertices.front() / nc == na ? "top" : "bottom");
  });
  return mesh;
}

std::string_view warp_kind_name(WarpKind kind) {
  switch (kind) {
    case WarpKind::identity: return "identity";
    case WarpKind::radial_bulge: return "radial_bulge";
    case WarpKind::axial_twist: return "axial_twist";
    case WarpKind::anisotropic_scale: return "anisotropic_scale";
    case WarpKind::composite: return "composite";
  }
  return "identity";
}

std::optional<WarpKind> parse_warp_kind(std::string_view name) {
  for (WarpKind k : {WarpKind::identity, WarpKind::radial_bulge, WarpKind::axial_twist,
                     WarpKind::anisotropic_scale, WarpKind::composite}) {
    if (warp_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

void WarpSpec::validate() const {
  switch (kind) {
    case WarpKind::radial_bulge:
      if (!(std::abs(bulge) <= 0.3)) throw ValidationError("warp.bulge must lie in [-0.3, 0.3]");
      break;
    case WarpKind::axial_twist:
      if (!(std::abs(twist_deg) <= 30.0)) throw ValidationError("warp.twist_deg must lie in [-30, 30]");
      break;
    case WarpKind::anisotropic_scale:
      for (int k = 0; k < 3; ++k) {
        if (!(scale[k] >= 0.5 && scale[k] <= 2.0)) {
          throw ValidationError("warp.scale entries must lie in [0.5, 2]");
        }
      }
      break;
    default: break;
  }
}

Warp::Warp(const WarpSpec& spec, const Box& bounds) {
  spec.validate();
  if (std::isfinite(bounds.lo.z()) && bounds.hi.z() > bounds.lo.z()) {
    z0_ = bounds.lo.z();
    z1_ = bounds.hi.z();
  }
  switch (spec.kind) {
    case WarpKind::identity: break;
    case WarpKind::radial_bulge: bulge_ = spec.bulge; break;
    case WarpKind::axial_twist: twist_ = spec.twist_deg * kPi / 180.0; break;
    case WarpKind::anisotropic_scale: scale_ = spec.scale; break;
    case WarpKind::composite: {
      std::mt19937_64 rng(spec.seed);
      auto draw = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
      };
      bulge_ = draw(0.05, 0.1);
      lobe_ = draw(0.0, 0.05);
      phase_ = draw(0.0, 2.0 * kPi);
      twist_ = draw(-10.0, 10.0) * kPi / 180.0;
      for (int k = 0; k < 3; ++k) scale_[k] = draw(0.9, 1.1);
      break;
    }
  }
}

Vec3 Warp::operator()(const Vec3& p) const {
  const double zeta = (p.z() - z0_) / (z1_ - z0_);
  const double s = std::sin(kPi * zeta);
  double f = 1.0 + bulge_ * s;
  if (lobe_ != 0.0) f += lobe_ * std::cos(3.0 * std::atan2(p.y(), p.x()) + phase_) * s;
  const double x = f * p.x(), y = f * p.y();
  const double ang = twist_ * (zeta - 0.5);
  const double c = std::cos(ang), sn = std::sin(ang);
  return Vec3(scale_.x() * (c * x - sn * y), scale_.y() * (sn * x + c * y), scale_.z() * p.z());
}

Mat3 Warp::jacobian(const Vec3& p, double h) const {
  Mat3 j;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = h;
    j.col(k) = ((*this)(p + e) - (*this)(p - e)) / (2.0 * h);
  }
  return j;
}

double min_jacobian_determinant(const Warp& warp, const Box& box, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = box.lo[k] + unit(rng) * (box.hi[k] - box.lo[k]);
    lowest = std::min(lowest, warp.jacobian(p).determinant());
  }
  return lowest;
}

TriSurface refine_surface(const QuadMesh& mesh, int level) {
  if (level < 0 || level > 6) throw ValidationError("refine_surface: level out of range");
  TriSurface s = refine(mesh, level).surface;
  s.vertex_normals = vertex_normals(s.vertices, s.triangles);
  return s;
}

SyntheticCase gen_target(const QuadMesh& templ, const WarpSpec& spec, int level) {
  if (level < 2 || level > 4) throw ValidationError("refine level must lie in [2, 4]");
  const ValidationReport report = validate(templ);
  if (!report.ok()) throw ValidationError("gen_target: invalid template: " + report.summary());
  const Warp warp(spec, bounding_box(templ.vertices));

  Refinement r = refine(templ, level);
  SyntheticCase out;
  out.target = std::move(r.surface);
  for (Vec3& p : out.target.vertices) p = warp(p);
  out.target.vertex_normals = vertex_normals(out.target.vertices, out.target.triangles);

  out.truth = templ;
  for (Vec3& p : out.truth.vertices) p = warp(p);

  for (const BoundaryLoop& loop : templ.boundary_loops) {
    BoundaryConstraint c;
    c.loop = loop.name;
    c.closed = loop.closed;
    const auto& v = loop.vertices;
    const std::size_t edges = loop.closed ? v.size() : v.size() - 1;
    for (std::size_t i = 0; i < edges; ++i) {
      const int p = v[i], q = v[(i + 1) % v.size()];
      for (int s = 0; s < r.n; ++s) c.points.push_back(out.target.vertices[r.edge_point(p, q, s)]);
    }
    if (!loop.closed) c.points.push_back(out.target.vertices[v.back()]);
    out.constraints.push_back(std::move(c));
  }

  const SurfaceIndex index(out.target);
  for (const Vec3& p : out.truth.vertices) {
    out.refinement_error = std::max(out.refinement_error, index.nearest(p).distance);
  }
  return out;
}

}  // namespace quadfit
