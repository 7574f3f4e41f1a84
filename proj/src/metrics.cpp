#include "quadfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "quadfit/errors.hpp"
#include "quadfit/spatial.hpp"

namespace quadfit {

namespace {

std::vector<Vec3> gather(const QuadMesh& mesh, const std::vector<int>& idx) {
  std::vector<Vec3> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(mesh.vertices[static_cast<std::size_t>(i)]);
  return out;
}

void require_correspondence(const QuadMesh& pred, const QuadMesh& truth) {
  if (pred.vertices.size() != truth.vertices.size() || pred.quads != truth.quads ||
      pred.labels != truth.labels) {
    throw CorrespondenceError("meshes do not share topology");
  }
}

void require_nonempty(Vertices a, Vertices b, const char* who) {
  if (a.empty() || b.empty()) throw QueryError(std::string(who) + ": empty region");
}

double mean_nearest(Vertices from, Vertices to) {
  double sum = 0.0;
  for (const Vec3& p : from) sum += nearest_vertex(p, to).distance;
  return sum / static_cast<double>(from.size());
}

}  // namespace

std::string_view region_name(Region r) {
  switch (r) {
    case Region::leaflet0: return "leaflet0";
    case Region::leaflet1: return "leaflet1";
    case Region::leaflet2: return "leaflet2";
    case Region::wall: return "wall";
    case Region::whole: return "whole";
  }
  return "whole";
}

std::optional<Region> parse_region(std::string_view name) {
  for (Region r : kRegions) {
    if (region_name(r) == name) return r;
  }
  return std::nullopt;
}

std::vector<int> region_vertices(const QuadMesh& mesh, Region r) {
  switch (r) {
    case Region::whole: return referenced_vertices(mesh);
    case Region::wall: return component_vertices(mesh, Component::wall);
    case Region::leaflet0: return component_vertices(mesh, Component::leaflet0);
    case Region::leaflet1: return component_vertices(mesh, Component::leaflet1);
    case Region::leaflet2: return component_vertices(mesh, Component::leaflet2);
  }
  return {};
}

double appd(Vertices pred, Vertices truth) {
  if (pred.size() != truth.size()) throw CorrespondenceError("appd: vertex count mismatch");
  if (pred.empty()) throw QueryError("appd: empty region");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - truth[i]).norm();
  return sum / static_cast<double>(pred.size());
}

double appd(const QuadMesh& pred, const QuadMesh& truth, Region r) {
  require_correspondence(pred, truth);
  const auto idx = region_vertices(truth, r);
  return appd(gather(pred, idx), gather(truth, idx));
}

double chamfer_metric(Vertices a, Vertices b) {
  require_nonempty(a, b, "chamfer_metric");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

double chamfer_metric(const QuadMesh& pred, const QuadMesh& truth, Region r) {
  return chamfer_metric(gather(pred, region_vertices(pred, r)),
                        gather(truth, region_vertices(truth, r)));
}

double surface_chamfer(Vertices pred, std::span<const Quad> quads, const TriSurface& target) {
  if (pred.empty() || target.vertices.empty()) throw QueryError("surface_chamfer: empty surface");
  const SurfaceIndex to_target(target);
  const SurfaceIndex to_pred(pred, triangulate(quads));
  if (to_target.empty() || to_pred.empty()) throw QueryError("surface_chamfer: surface has no area");
  double a = 0.0, b = 0.0;
  for (const Vec3& p : pred) a += to_target.nearest(p).distance;
  for (const Vec3& g : target.vertices) b += to_pred.nearest(g).distance;
  return 0.5 * (a / static_cast<double>(pred.size()) + b / static_cast<double>(target.vertices.size()));
}

double directed_hausdorff(Vertices a, Vertices b) {
  require_nonempty(a, b, "hausdorff");
  double worst = 0.0;
  for (const Vec3& p : a) worst = std::max(worst, nearest_vertex(p, b).distance);
  return worst;
}

double hausdorff(Vertices a, Vertices b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

double hausdorff(const QuadMesh& pred, const QuadMesh& truth, Region r) {
  return hausdorff(gather(pred, region_vertices(pred, r)), gather(truth, region_vertices(truth, r)));
}

std::map<std::string, double> landmark_errors(const QuadMesh& pred, const QuadMesh& truth) {
  std::map<std::string, double> out;
  for (std::string_view name : kLandmarkNames) {
    const std::string key(name);
    auto p = pred.landmarks.find(key);
    auto t = truth.landmarks.find(key);
    if (p == pred.landmarks.end() || t == truth.landmarks.end()) {
      throw ValidationError("missing landmark " + key);
    }
    if (p->second != t->second) throw ValidationError("landmark " + key + " index differs");
    const auto i = static_cast<std::size_t>(p->second);
    if (i >= pred.vertices.size() || i >= truth.vertices.size()) {
      throw ValidationError("landmark " + key + " out of range");
    }
    out[key] = (pred.vertices[i] - truth.vertices[i]).norm();
  }
  return out;
}

QuadQuality quad_quality(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  QuadQuality q;
  const std::array<Vec3, 4> x = {a, b, c, d};
  std::array<double, 4> len;
  for (int k = 0; k < 4; ++k) len[k] = (x[(k + 1) % 4] - x[k]).norm();
  const double scale = std::max({len[0], len[1], len[2], len[3]});
  const double area_tol = 1e-12 * std::max(scale * scale, 1.0);
  std::array<Vec3, 4> corner;
  int strongest = 0;
  for (int k = 0; k < 4; ++k) {
    corner[k] = (x[(k + 1) % 4] - x[k]).cross(x[(k + 3) % 4] - x[k]);
    if (corner[k].norm() > corner[strongest].norm()) strongest = k;
  }
  Vec3 normal = (c - a).cross(d - b);
  // Parallel diagonals (a symmetric bow-tie) leave no diagonal normal; fall
  // back to the strongest corner so the crossing still shows up as inverted.
  if (!(normal.norm() > area_tol)) normal = corner[strongest];
  if (!(*std::min_element(len.begin(), len.end()) > 1e-12 * std::max(scale, 1.0)) ||
      !(normal.norm() > area_tol)) {
    q.degenerate = true;
    return q;
  }
  const double su = 0.5 * (len[0] + len[2]), sv = 0.5 * (len[1] + len[3]);
  q.aspect = std::max(su, sv) / std::min(su, sv);
  for (int k = 0; k < 4; ++k) {
    const Vec3 e1 = x[(k + 1) % 4] - x[k];
    const Vec3 e2 = x[(k + 3) % 4] - x[k];
    const double cosang = std::clamp(e1.dot(e2) / (len[k] * len[(k + 3) % 4]), -1.0, 1.0);
    const double deg = std::acos(cosang) * 180.0 / std::numbers::pi;
    q.corner_deviation_deg = std::max(q.corner_deviation_deg, std::abs(deg - 90.0));
    if (corner[k].dot(normal) < 0.0) q.inverted = true;
  }
  const Vec3 cen = 0.25 * (a + b + c + d);
  Mat3 s = Mat3::Zero();
  for (const Vec3& p : x) s += (p - cen) * (p - cen).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
  const Vec3 n = eig.eigenvectors().col(0);
  for (const Vec3& p : x) q.flatness = std::max(q.flatness, std::abs(n.dot(p - cen)));
  return q;
}

QualityStats quality_report(const QuadMesh& mesh) {
  QualityStats st;
  st.quads = mesh.quads.size();
  st.per_quad.reserve(mesh.quads.size());
  double inf = std::numeric_limits<double>::infinity();
  st.min_aspect = inf;
  st.min_corner_deviation_deg = inf;
  std::size_t good = 0;
  for (const Quad& q : mesh.quads) {
    for (int v : q) {
      if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size()) {
        throw ValidationError("quality_report: quad index out of range");
      }
    }
    const QuadQuality qq = quad_quality(mesh.vertices[q[0]], mesh.vertices[q[1]],
                                        mesh.vertices[q[2]], mesh.vertices[q[3]]);
    st.per_quad.push_back(qq);
    if (qq.degenerate) {
      ++st.degenerate;
      continue;
    }
    ++good;
    if (qq.inverted) ++st.inverted;
    st.min_aspect = std::min(st.min_aspect, qq.aspect);
    st.max_aspect = std::max(st.max_aspect, qq.aspect);
    st.mean_aspect += qq.aspect;
    st.min_corner_deviation_deg = std::min(st.min_corner_deviation_deg, qq.corner_deviation_deg);
    st.max_corner_deviation_deg = std::max(st.max_corner_deviation_deg, qq.corner_deviation_deg);
    st.mean_corner_deviation_deg += qq.corner_deviation_deg;
    st.max_flatness = std::max(st.max_flatness, qq.flatness);
    st.mean_flatness += qq.flatness;
  }
  if (good == 0) {
    st.min_aspect = st.min_corner_deviation_deg = 0.0;
  } else {
    st.mean_aspect /= static_cast<double>(good);
    st.mean_corner_deviation_deg /= static_cast<double>(good);
    st.mean_flatness /= static_cast<double>(good);
  }
  return st;
}

MetricsReport evaluate(const QuadMesh& pred, const QuadMesh& truth) {
  require_correspondence(pred, truth);
  MetricsReport rep;
  for (Region r : kRegions) {
    const auto idx = region_vertices(truth, r);
    if (idx.empty()) continue;
    const auto p = gather(pred, idx);
    const auto t = gather(truth, idx);
    rep.regions[r] = {appd(p, t), chamfer_metric(p, t), hausdorff(p, t)};
  }
  bool has_landmarks = true;
  for (std::string_view name : kLandmarkNames) {
    if (!truth.landmarks.count(std::string(name))) has_landmarks = false;
  }
  if (has_landmarks) rep.landmarks = landmark_errors(pred, truth);
  rep.quality = quality_report(pred);
  return rep;
}

std::vector<MetricRow> report_rows(const MetricsReport& report) {
  std::vector<MetricRow> rows;
  for (Region r : kRegions) {
    auto it = report.regions.find(r);
    if (it == report.regions.end()) continue;
    const std::string name(region_name(r));
    rows.push_back({name, "appd_mm", it->second.appd});
    rows.push_back({name, "chamfer_mm", it->second.chamfer});
    rows.push_back({name, "hausdorff_mm", it->second.hausdorff});
  }
  for (std::string_view name : kLandmarkNames) {
    auto it = report.landmarks.find(std::string(name));
    if (it != report.landmarks.end()) rows.push_back({"landmarks", it->first + "_mm", it->second});
  }
  const QualityStats& q = report.quality;
  rows.push_back({"quality", "min_aspect", q.min_aspect});
  rows.push_back({"quality", "mean_aspect", q.mean_aspect});
  rows.push_back({"quality", "min_corner_deviation_deg", q.min_corner_deviation_deg});
  rows.push_back({"quality", "mean_corner_deviation_deg", q.mean_corner_deviation_deg});
  rows.push_back({"quality", "max_corner_deviation_deg", q.max_corner_deviation_deg});
  rows.push_back({"quality", "max_flatness_mm", q.max_flatness});
  rows.push_back({"quality", "inverted_quads", static_cast<double>(q.inverted)});
  rows.push_back({"quality", "degenerate_quads", static_cast<double>(q.degenerate)});
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricRow>>& cases) {
  std::vector<AggregateRow> rows;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const auto& c : cases) {
    for (const MetricRow& r : c) {
      auto key = std::make_pair(r.region, r.metric);
      auto [it, fresh] = values.try_emplace(key);
      if (fresh) rows.push_back({r.region, r.metric, 0.0, 0.0, 0});
      it->second.push_back(r.value);
    }
  }
  for (AggregateRow& row : rows) {
    const auto& v = values[{row.region, row.metric}];
    row.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    row.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - row.mean) * (x - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  return rows;
}

}  // namespace quadfit
