#include "quadfit/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "quadfit/errors.hpp"
#include "quadfit/io.hpp"

namespace quadfit {

using ojson = nlohmann::ordered_json;

namespace {

std::string number_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

ojson rows_json(const std::vector<MetricRow>& rows) {
  ojson a = ojson::array();
  for (const MetricRow& r : rows) {
    a.push_back({{"region", r.region}, {"metric", r.metric}, {"value", report_number(r.value)}});
  }
  return a;
}

ojson numbers(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(report_number(x));
  return a;
}

ojson vec_json(const Vec3& v) { return {report_number(v.x()), report_number(v.y()), report_number(v.z())}; }

std::vector<MetricRow> quality_rows(const QualityStats& q) {
  MetricsReport m;
  m.quality = q;
  return report_rows(m);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ojson report_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(number_text(v).c_str(), nullptr);
}

ojson quality_json(const QualityStats& q) {
  return {{"quads", q.quads},
          {"degenerate_quads", q.degenerate},
          {"inverted_quads", q.inverted},
          {"min_aspect", report_number(q.min_aspect)},
          {"mean_aspect", report_number(q.mean_aspect)},
          {"max_aspect", report_number(q.max_aspect)},
          {"min_corner_deviation_deg", report_number(q.min_corner_deviation_deg)},
          {"mean_corner_deviation_deg", report_number(q.mean_corner_deviation_deg)},
          {"max_corner_deviation_deg", report_number(q.max_corner_deviation_deg)},
          {"mean_flatness_mm", report_number(q.mean_flatness)},
          {"max_flatness_mm", report_number(q.max_flatness)}};
}

ojson metrics_json(const MetricsReport& r) {
  ojson j;
  j["kind"] = "metrics";
  ojson regions = ojson::object();
  for (Region reg : kRegions) {
    auto it = r.regions.find(reg);
    if (it == r.regions.end()) continue;
    regions[std::string(region_name(reg))] = {{"appd_mm", report_number(it->second.appd)},
                                              {"chamfer_mm", report_number(it->second.chamfer)},
                                              {"hausdorff_mm", report_number(it->second.hausdorff)}};
  }
  j["regions"] = regions;
  ojson lm = ojson::object();
  for (std::string_view name : kLandmarkNames) {
    auto it = r.landmarks.find(std::string(name));
    if (it != r.landmarks.end()) lm[it->first] = report_number(it->second);
  }
  j["landmarks"] = lm;
  j["quality"] = quality_json(r.quality);
  j["rows"] = rows_json(report_rows(r));
  return j;
}

std::vector<MetricRow> fit_rows(const FitReport& r) {
  std::vector<MetricRow> rows = {
      {"fit", "affine_rms_mm", r.affine.rms},
      {"fit", "affine_rounds", static_cast<double>(r.affine.rounds)},
      {"fit", "boundary_distance_after_affine_mm", r.boundary_distance_after_affine},
      {"fit", "boundary_distance_after_boundary_stage_mm", r.boundary_distance_after_boundary_stage},
      {"fit", "learning_rate_boundary", r.learning_rate_boundary},
      {"fit", "learning_rate_interior", r.learning_rate_interior},
      {"fit", "surface_distance_mean_mm", r.surface_distance_mean},
      {"fit", "surface_distance_max_mm", r.surface_distance_max},
      {"fit", "surface_chamfer_affine_mm", r.surface_chamfer_affine},
      {"fit", "surface_chamfer_mm", r.surface_chamfer},
  };
  const auto tail = r.metrics ? report_rows(*r.metrics) : quality_rows(r.quality);
  rows.insert(rows.end(), tail.begin(), tail.end());
  return rows;
}

ojson fit_report_json(const FitReport& r) {
  ojson j;
  j["kind"] = "fit";
  const Mat3& A = r.affine.transform.A;
  j["affine"] = {{"A", {vec_json(A.row(0).transpose()), vec_json(A.row(1).transpose()), vec_json(A.row(2).transpose())}},
                 {"t", vec_json(r.affine.transform.t)},
                 {"rms_mm", report_number(r.affine.rms)},
                 {"rounds", r.affine.rounds}};
  j["boundary_distance_after_affine_mm"] = report_number(r.boundary_distance_after_affine);
  j["boundary_distance_after_boundary_stage_mm"] = report_number(r.boundary_distance_after_boundary_stage);
  j["learning_rate_boundary"] = report_number(r.learning_rate_boundary);
  j["learning_rate_interior"] = report_number(r.learning_rate_interior);
  j["surface_distance_mean_mm"] = report_number(r.surface_distance_mean);
  j["surface_distance_max_mm"] = report_number(r.surface_distance_max);
  j["surface_chamfer_affine_mm"] = report_number(r.surface_chamfer_affine);
  j["surface_chamfer_mm"] = report_number(r.surface_chamfer);
  j["quality"] = quality_json(r.quality);
  j["metrics"] = r.metrics ? metrics_json(*r.metrics) : ojson(nullptr);
  j["affine_metrics"] = r.affine_metrics ? metrics_json(*r.affine_metrics) : ojson(nullptr);
  j["traces"] = {{"relax_mc", numbers(r.relax_trace)},
                 {"boundary_stage", numbers(r.boundary_trace)},
                 {"interior_stage", numbers(r.interior_trace)}};
  j["rows"] = rows_json(fit_rows(r));
  return j;
}

ojson gradcheck_json(const GradcheckResult& r) {
  ojson cases = ojson::array();
  for (const GradcheckCase& c : r.cases) {
    cases.push_back({{"loss", c.loss},
                     {"case", c.index},
                     {"mesh", c.mesh},
                     {"vertices", c.vertices},
                     {"redraws", c.redraws},
                     {"value", report_number(c.value)},
                     {"error", report_number(c.error)},
                     {"passed", c.passed},
                     {"note", c.note}});
  }
  return {{"kind", "gradcheck"}, {"passed", r.passed()}, {"cases", cases}};
}

ojson aggregate_json(const std::vector<AggregateRow>& rows, std::size_t cases) {
  ojson a = ojson::array();
  for (const AggregateRow& r : rows) {
    a.push_back({{"region", r.region},
                 {"metric", r.metric},
                 {"mean", report_number(r.mean)},
                 {"std", report_number(r.stddev)},
                 {"count", r.count}});
  }
  return {{"kind", "aggregate"}, {"cases", cases}, {"rows", a}};
}

std::string rows_csv(const std::vector<MetricRow>& rows) {
  std::string out = "region,metric,value\n";
  for (const MetricRow& r : rows) out += r.region + "," + r.metric + "," + number_text(r.value) + "\n";
  return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = "region,metric,mean,std,count\n";
  for (const AggregateRow& r : rows) {
    out += r.region + "," + r.metric + "," + number_text(r.mean) + "," + number_text(r.stddev) + "," +
           std::to_string(r.count) + "\n";
  }
  return out;
}

std::string gradcheck_csv(const GradcheckResult& r) {
  std::string out = "loss,case,mesh,vertices,redraws,value,error,passed\n";
  for (const GradcheckCase& c : r.cases) {
    out += c.loss + "," + std::to_string(c.index) + "," + c.mesh + "," + std::to_string(c.vertices) + "," +
           std::to_string(c.redraws) + "," + number_text(c.value) + "," + number_text(c.error) + "," +
           (c.passed ? "1" : "0") + "\n";
  }
  return out;
}

std::optional<std::vector<MetricRow>> read_metric_rows(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  const std::string text = read_text(path);
  std::vector<MetricRow> rows;
  if (ext == ".csv") {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"region", "metric", "value"}) {
      return std::nullopt;
    }
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv(line);
      if (cells.size() != 3) throw ParseError(path.string(), lineno, "expected three columns");
      char* end = nullptr;
      const double v = std::strtod(cells[2].c_str(), &end);
      if (cells[2].empty() || *end != '\0') throw ParseError(path.string(), lineno, "bad value");
      rows.push_back({cells[0], cells[1], v});
    }
    return rows;
  }
  if (ext != ".json") return std::nullopt;
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;
  }
  if (!j.is_object() || !j.contains("kind") || !j.contains("rows") || !j["rows"].is_array()) return std::nullopt;
  const std::string kind = j["kind"].is_string() ? j["kind"].get<std::string>() : "";
  if (kind != "metrics" && kind != "fit" && kind != "quality") return std::nullopt;
  for (const auto& r : j["rows"]) {
    if (!r.is_object() || !r.contains("region") || !r.contains("metric") || !r.contains("value") ||
        !r["region"].is_string() || !r["metric"].is_string()) {
      throw ValidationError(path.string() + ": malformed report row");
    }
    const double v = r["value"].is_number() ? r["value"].get<double>() : std::nan("");
    rows.push_back({r["region"].get<std::string>(), r["metric"].get<std::string>(), v});
  }
  return rows;
}

}  // namespace quadfit
