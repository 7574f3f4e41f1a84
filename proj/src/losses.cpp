#include "quadfit/losses.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "quadfit/errors.hpp"

namespace quadfit {

namespace {

LossValue zero_loss(std::size_t n) {
  LossValue out;
  out.gradient.assign(n, Vec3::Zero());
  return out;
}

void check_adjacency(Vertices pred, const AdjacencyTable& adj, const char* who) {
  if (adj.size() != pred.size()) {
    throw ShapeError(std::string(who) + ": adjacency has " + std::to_string(adj.size()) +
                     " vertices, prediction has " + std::to_string(pred.size()));
  }
}

template <std::size_t K>
void check_faces(Vertices pred, std::span<const std::array<int, K>> faces, const char* who) {
  const auto n = static_cast<int>(pred.size());
  for (const auto& f : faces) {
    for (int v : f) {
      if (v < 0 || v >= n) throw ValidationError(std::string(who) + ": face index out of range");
    }
  }
}

double edge_len(const Vec3& a, const Vec3& b, const char* who) {
  const double l = (b - a).norm();
  if (!(l > 0.0)) throw GeometryError(std::string(who) + ": zero-length edge");
  return l;
}

// Averaged opposite side lengths (u: edges 01 and 23, v: edges 12 and 30)
// and their gradients with respect to the four corners.
struct SidePairs {
  double su = 0.0, sv = 0.0;
  std::array<Vec3, 4> dsu, dsv;
};

SidePairs side_pairs(Vertices x, const Quad& q, const char* who) {
  SidePairs s;
  for (auto& g : s.dsu) g.setZero();
  for (auto& g : s.dsv) g.setZero();
  for (int k = 0; k < 4; ++k) {
    const int a = k, b = (k + 1) % 4;
    const Vec3 e = x[q[b]] - x[q[a]];
    const double l = edge_len(x[q[a]], x[q[b]], who);
    const Vec3 de = 0.5 * e / l;
    auto& d = (k % 2 == 0) ? s.dsu : s.dsv;
    ((k % 2 == 0) ? s.su : s.sv) += 0.5 * l;
    d[b] += de;
    d[a] -= de;
  }
  return s;
}

double corner_cos(Vertices x, const Quad& q, int k, Vec3* g_prev, Vec3* g_self, Vec3* g_next,
                  const char* who) {
  const Vec3& p = x[q[k]];
  const Vec3 e1 = x[q[(k + 1) % 4]] - p;
  const Vec3 e2 = x[q[(k + 3) % 4]] - p;
  const double l1 = edge_len(p, x[q[(k + 1) % 4]], who);
  const double l2 = edge_len(p, x[q[(k + 3) % 4]], who);
  const double c = e1.dot(e2) / (l1 * l2);
  if (g_next) {
    const Vec3 d1 = e2 / (l1 * l2) - c * e1 / (l1 * l1);
    const Vec3 d2 = e1 / (l1 * l2) - c * e2 / (l2 * l2);
    *g_next = d1;
    *g_prev = d2;
    *g_self = -(d1 + d2);
  }
  return c;
}

template <std::size_t K>
LossValue loss_normal_impl(Vertices pred, std::span<const std::array<int, K>> faces,
                           const TriSurface& target) {
  if (target.vertex_normals.empty() || target.vertex_normals.size() != target.vertices.size()) {
    throw ConfigError("loss_normal: target surface has no vertex normals");
  }
  if (target.vertices.empty()) throw QueryError("loss_normal: empty target");
  check_faces<K>(pred, faces, "loss_normal");
  const std::size_t n = pred.size();

  // Incident (face, corner) pairs per vertex in face order.
  std::vector<std::vector<std::pair<int, int>>> incident(n);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int c = 0; c < static_cast<int>(K); ++c) {
      incident[static_cast<std::size_t>(faces[f][c])].push_back({static_cast<int>(f), c});
    }
  }

  LossValue out = zero_loss(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (incident[i].empty()) {
      ++out.skipped;
      continue;
    }
    const Vec3& p = pred[i];
    const Vec3& ng = target.vertex_normals[static_cast<std::size_t>(
        nearest_vertex(p, target.vertices).index)];

    struct Term {
      int next, prev;
      Vec3 e1, e2, u;
      double value;
    };
    std::vector<Term> terms;
    for (auto [f, c] : incident[i]) {
      const auto& face = faces[static_cast<std::size_t>(f)];
      const int next = face[(c + 1) % K];
      const int prev = face[(c + K - 1) % K];
      const Vec3 e1 = pred[next] - p;
      const Vec3 e2 = pred[prev] - p;
      const Vec3 cr = e1.cross(e2);
      const double len = cr.norm();
      if (!(len > 1e-12)) continue;
      const Vec3 nh = cr / len;
      const Vec3 u = -2.0 * (ng - nh * nh.dot(ng)) / len;
      terms.push_back({next, prev, e1, e2, u, (nh - ng).squaredNorm()});
    }
    if (terms.empty()) {
      ++out.skipped;
      continue;
    }
    const double inv = 1.0 / static_cast<double>(terms.size());
    for (const Term& t : terms) {
      out.value += inv * t.value;
      const Vec3 g1 = inv * t.e2.cross(t.u);
      const Vec3 g2 = inv * t.u.cross(t.e1);
      out.gradient[static_cast<std::size_t>(t.next)] += g1;
      out.gradient[static_cast<std::size_t>(t.prev)] += g2;
      out.gradient[i] -= g1 + g2;
    }
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  for (const auto& [name, w] : alpha) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("weight alpha." + name + " must be >= 0");
  }
  for (double w : lambda) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("lambda weights must be >= 0");
  }
}

double LossWeights::a(const std::string& name) const {
  auto it = alpha.find(name);
  return it == alpha.end() ? 0.0 : it->second;
}

LossValue loss_geom(Vertices pred, Vertices truth) {
  if (pred.size() != truth.size()) throw ShapeError("loss_geom: length mismatch");
  if (pred.empty()) throw ShapeError("loss_geom: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  LossValue out = zero_loss(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec3 d = pred[i] - truth[i];
    out.value += d.squaredNorm();
    out.gradient[i] = 2.0 * inv * d;
  }
  out.value *= inv;
  return out;
}

LossValue loss_mc(Vertices pred, const AdjacencyTable& adj) {
  check_adjacency(pred, adj, "loss_mc");
  const std::size_t n = pred.size();
  LossValue out = zero_loss(n);
  if (n == 0) return out;
  std::vector<Vec3> u(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : adj.neighbors[i]) u[i] += pred[j] - pred[i];
    out.value += u[i].squaredNorm();
  }
  const double s = 2.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vec3 g = -static_cast<double>(adj.neighbors[k].size()) * u[k];
    for (int i : adj.neighbors[k]) g += u[i];
    out.gradient[k] = s * g;
  }
  out.value /= static_cast<double>(n);
  return out;
}

LossValue loss_chamfer(Vertices pred, Vertices target) {
  if (pred.empty() || target.empty()) throw QueryError("loss_chamfer: empty point set");
  LossValue out = zero_loss(pred.size());
  const double ip = 1.0 / static_cast<double>(pred.size());
  const double ig = 1.0 / static_cast<double>(target.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int g = nearest_vertex(pred[i], target).index;
    const Vec3 d = pred[i] - target[g];
    out.value += ip * d.squaredNorm();
    out.gradient[i] += 2.0 * ip * d;
  }
  for (const Vec3& g : target) {
    const int p = nearest_vertex(g, pred).index;
    const Vec3 d = pred[p] - g;
    out.value += ig * d.squaredNorm();
    out.gradient[p] += 2.0 * ig * d;
  }
  return out;
}

LossValue loss_normal(Vertices pred, std::span<const Quad> faces, const TriSurface& target) {
  return loss_normal_impl<4>(pred, faces, target);
}

LossValue loss_normal(Vertices pred, std::span<const Tri> faces, const TriSurface& target) {
  return loss_normal_impl<3>(pred, faces, target);
}

double auto_edge_mu(Vertices pred, const AdjacencyTable& adj) {
  check_adjacency(pred, adj, "auto_edge_mu");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (int j : adj.neighbors[i]) {
      if (static_cast<std::size_t>(j) > i) {
        sum += (pred[j] - pred[i]).norm();
        ++count;
      }
    }
  }
  if (count == 0) throw TopologyError("auto_edge_mu: mesh has no edges");
  return sum / static_cast<double>(count);
}

LossValue loss_edge(Vertices pred, const AdjacencyTable& adj, std::optional<double> mu) {
  check_adjacency(pred, adj, "loss_edge");
  if (mu && !(*mu > 0.0 && std::isfinite(*mu))) throw ValidationError("loss_edge: mu must be > 0");
  const double m = mu ? *mu : auto_edge_mu(pred, adj);
  const double m2 = m * m;
  LossValue out = zero_loss(pred.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (int j : adj.neighbors[i]) {
      const Vec3 d = pred[i] - pred[j];
      const double r = d.squaredNorm() - m2;
      out.value += std::abs(r);
      const double s = (r > 0.0) - (r < 0.0);
      out.gradient[i] += 2.0 * s * d;
      out.gradient[static_cast<std::size_t>(j)] -= 2.0 * s * d;
    }
  }
  return out;
}

LossValue loss_laplacian(Vertices pred, const AdjacencyTable& adj) {
  check_adjacency(pred, adj, "loss_laplacian");
  const std::size_t n = pred.size();
  std::vector<Vec3> r(n);
  LossValue out = zero_loss(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = adj.neighbors[i];
    if (nb.empty()) throw TopologyError("loss_laplacian: isolated vertex " + std::to_string(i));
    Vec3 mean = Vec3::Zero();
    for (int j : nb) mean += pred[j];
    r[i] = pred[i] - mean / static_cast<double>(nb.size());
    out.value += r[i].squaredNorm();
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.gradient[i] += 2.0 * r[i];
    const double w = 2.0 / static_cast<double>(adj.neighbors[i].size());
    for (int j : adj.neighbors[i]) out.gradient[static_cast<std::size_t>(j)] -= w * r[i];
  }
  return out;
}

LossValue loss_flatness(std::span<const Quad> quads, Vertices pred) {
  check_faces<4>(pred, quads, "loss_flatness");
  LossValue out = zero_loss(pred.size());
  if (quads.empty()) return out;
  const double inv = 1.0 / static_cast<double>(quads.size());
  for (const Quad& q : quads) {
    Vec3 c = Vec3::Zero();
    for (int v : q) c += pred[v];
    c /= 4.0;
    Mat3 s = Mat3::Zero();
    for (int v : q) {
      const Vec3 d = pred[v] - c;
      s += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
    const Vec3 lam = eig.eigenvalues();
    // Collinear or coincident corners leave the plane undefined.
    if (!(lam[1] > 1e-12 * std::max(lam[2], 1e-300))) {
      ++out.skipped;
      continue;
    }
    const Vec3 nrm = eig.eigenvectors().col(0);
    double val = 0.0;
    for (int v : q) {
      const double h = nrm.dot(pred[v] - c);
      val += h * h;
      out.gradient[static_cast<std::size_t>(v)] += inv * 2.0 * h * nrm;
    }
    out.value += inv * val;
  }
  return out;
}

LossValue loss_aspect(std::span<const Quad> quads, Vertices pred, Vertices reference) {
  check_faces<4>(pred, quads, "loss_aspect");
  const bool ref = !reference.empty();
  if (ref && reference.size() != pred.size()) throw ShapeError("loss_aspect: reference length mismatch");
  LossValue out = zero_loss(pred.size());
  if (quads.empty()) return out;
  const double inv = 1.0 / static_cast<double>(quads.size());
  for (const Quad& q : quads) {
    const SidePairs s = side_pairs(pred, q, "loss_aspect");
    double r, target;
    std::array<Vec3, 4> dr;
    // Oriented ratio num/den.
    auto oriented = [&](double num, double den, const std::array<Vec3, 4>& dn,
                        const std::array<Vec3, 4>& dd) {
      r = num / den;
      for (int k = 0; k < 4; ++k) dr[k] = dn[k] / den - num * dd[k] / (den * den);
    };
    if (ref) {
      const SidePairs sr = side_pairs(reference, q, "loss_aspect");
      target = sr.su / sr.sv;
      oriented(s.su, s.sv, s.dsu, s.dsv);
    } else {
      target = 1.0;
      if (s.su >= s.sv) oriented(s.su, s.sv, s.dsu, s.dsv);
      else oriented(s.sv, s.su, s.dsv, s.dsu);
    }
    const double e = r - target;
    out.value += inv * e * e;
    for (int k = 0; k < 4; ++k) out.gradient[static_cast<std::size_t>(q[k])] += inv * 2.0 * e * dr[k];
  }
  return out;
}

LossValue loss_corner(std::span<const Quad> quads, Vertices pred, Vertices reference) {
  check_faces<4>(pred, quads, "loss_corner");
  const bool ref = !reference.empty();
  if (ref && reference.size() != pred.size()) throw ShapeError("loss_corner: reference length mismatch");
  LossValue out = zero_loss(pred.size());
  if (quads.empty()) return out;
  const double inv = 1.0 / static_cast<double>(quads.size());
  for (const Quad& q : quads) {
    for (int k = 0; k < 4; ++k) {
      Vec3 gp, gs, gn;
      const double c = corner_cos(pred, q, k, &gp, &gs, &gn, "loss_corner");
      const double target =
          ref ? corner_cos(reference, q, k, nullptr, nullptr, nullptr, "loss_corner") : 0.0;
      const double e = c - target;
      out.value += inv * e * e;
      const double w = inv * 2.0 * e;
      out.gradient[static_cast<std::size_t>(q[(k + 3) % 4])] += w * gp;
      out.gradient[static_cast<std::size_t>(q[k])] += w * gs;
      out.gradient[static_cast<std::size_t>(q[(k + 1) % 4])] += w * gn;
    }
  }
  return out;
}

LossValue loss_chamfer_surface(Vertices pred, std::span<const Quad> quads,
                               const SurfaceIndex& target, Vertices target_samples,
                               bool bidirectional) {
  if (pred.empty()) throw QueryError("loss_chamfer_surface: empty prediction");
  LossValue out = zero_loss(pred.size());
  const double ip = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const ClosestPoint cp = target.nearest(pred[i]);
    const Vec3 d = pred[i] - cp.point;
    out.value += ip * d.squaredNorm();
    out.gradient[i] += 2.0 * ip * d;
  }
  if (!bidirectional || target_samples.empty()) return out;

  check_faces<4>(pred, quads, "loss_chamfer_surface");
  const std::vector<Tri> tris = triangulate(quads);
  const SurfaceIndex predicted(pred, tris);
  if (predicted.empty()) throw GeometryError("loss_chamfer_surface: predicted surface has no area");
  const double ig = 1.0 / static_cast<double>(target_samples.size());
  for (const Vec3& g : target_samples) {
    const ClosestPoint cp = predicted.nearest(g);
    const Vec3 d = cp.point - g;
    out.value += ig * d.squaredNorm();
    const Tri& t = tris[static_cast<std::size_t>(cp.triangle)];
    for (int k = 0; k < 3; ++k) {
      out.gradient[static_cast<std::size_t>(t[k])] += 2.0 * ig * cp.barycentric[k] * d;
    }
  }
  return out;
}

LossValue compose_additive(std::span<const LossValue> terms, std::span<const double> lambda) {
  if (terms.size() != lambda.size()) throw ShapeError("compose_additive: weight count mismatch");
  if (terms.empty()) throw ShapeError("compose_additive: no terms");
  const std::size_t n = terms[0].gradient.size();
  LossValue out = zero_loss(n);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].gradient.size() != n) throw ShapeError("compose_additive: gradient length mismatch");
    out.value += lambda[k] * terms[k].value;
    out.skipped += terms[k].skipped;
    for (std::size_t i = 0; i < n; ++i) out.gradient[i] += lambda[k] * terms[k].gradient[i];
  }
  return out;
}

LossValue compose_multiplicative(std::span<const LossValue> terms, std::span<const double> lambda,
                                 double floor) {
  if (terms.size() != lambda.size()) throw ShapeError("compose_multiplicative: weight count mismatch");
  if (terms.empty()) throw ShapeError("compose_multiplicative: no terms");
  const std::size_t n = terms[0].gradient.size();
  const std::size_t m = terms.size();
  std::vector<double> f(m);
  std::vector<bool> floored(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (terms[k].gradient.size() != n) {
      throw ShapeError("compose_multiplicative: gradient length mismatch");
    }
    const double raw = lambda[k] * terms[k].value;
    floored[k] = !(raw > floor);
    f[k] = floored[k] ? floor : raw;
  }
  LossValue out = zero_loss(n);
  out.value = 1.0;
  for (double x : f) out.value *= x;
  for (std::size_t k = 0; k < m; ++k) {
    out.skipped += terms[k].skipped;
    if (floored[k]) continue;
    // Product of the other factors, formed directly so no factor is divided out.
    double others = lambda[k];
    for (std::size_t j = 0; j < m; ++j) {
      if (j != k) others *= f[j];
    }
    for (std::size_t i = 0; i < n; ++i) out.gradient[i] += others * terms[k].gradient[i];
  }
  return out;
}

std::vector<Vec3> finite_difference_gradient(const ScalarLoss& f, Vertices pred, double h) {
  if (!(h > 0.0)) throw ValidationError("finite_difference_gradient: h must be > 0");
  std::vector<Vec3> x(pred.begin(), pred.end());
  std::vector<Vec3> g(x.size(), Vec3::Zero());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double orig = x[i][k];
      x[i][k] = orig + h;
      const double fp = f(x);
      x[i][k] = orig - h;
      const double fm = f(x);
      x[i][k] = orig;
      g[i][k] = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

LossValue training_loss(Vertices pred, Vertices truth, const AdjacencyTable& adj) {
  const LossValue terms[2] = {loss_geom(pred, truth), loss_mc(pred, adj)};
  const double ones[2] = {1.0, 1.0};
  return compose_additive(terms, ones);
}

LossValue baseline_loss(Vertices pred, std::span<const Quad> quads, const AdjacencyTable& adj,
                        const TriSurface& truth, const LossWeights& weights, Composition mode,
                        std::optional<double> mu) {
  weights.validate();
  const LossValue terms[4] = {loss_chamfer(pred, truth.vertices), loss_normal(pred, quads, truth),
                              loss_edge(pred, adj, mu), loss_laplacian(pred, adj)};
  return mode == Composition::additive ? compose_additive(terms, weights.lambda)
                                       : compose_multiplicative(terms, weights.lambda);
}

}  // namespace quadfit
