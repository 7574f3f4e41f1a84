#include "quadfit/config.hpp"

#include <set>

#include "quadfit/errors.hpp"

namespace quadfit {

using ojson = nlohmann::ordered_json;

namespace {

// Reads the keys of one JSON object, rejecting any that were not asked for.
class Section {
 public:
  Section(const ojson& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
  }

  bool has(const char* key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const ojson& at(const char* key) { return j_.at(key); }

  void get(const char* key, double& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_number()) fail(key, "a number");
    out = v.get<double>();
  }
  void get(const char* key, int& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(key, "a 32-bit integer");
    out = static_cast<int>(x);
  }
  void get(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(key, "a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  void get(const char* key, bool& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_boolean()) fail(key, "a boolean");
    out = v.get<bool>();
  }
  void get(const char* key, std::string& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_string()) fail(key, "a string");
    out = v.get<std::string>();
  }
  template <class T>
  void get(const char* key, std::optional<T>& out) {
    if (!has(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }
  void get(const char* key, Vec3& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) fail(key, "an array of three numbers");
    for (std::size_t k = 0; k < 3; ++k) {
      if (!v[k].is_number()) fail(key, "an array of three numbers");
      out[static_cast<Eigen::Index>(k)] = v[k].get<double>();
    }
  }
  void get(const char* key, std::array<double, 4>& out) {
    if (!has(key)) return;
    const ojson& v = j_.at(key);
    if (!v.is_array() || v.size() != 4) fail(key, "an array of four numbers");
    for (std::size_t k = 0; k < 4; ++k) {
      if (!v[k].is_number()) fail(key, "an array of four numbers");
      out[k] = v[k].get<double>();
    }
  }

  // Unknown keys fail loudly.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!known_.count(k)) throw ConfigError(name_ + ": unknown key '" + k + "'");
    }
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(name_ + "." + key + ": expected " + what);
  }

  const std::string& name() const { return name_; }

 private:
  const ojson& j_;
  std::string name_;
  std::set<std::string> known_;
};

template <class Parse>
auto enum_value(Section& s, const char* key, const std::string& text, Parse parse) {
  auto v = parse(text);
  if (!v) throw ConfigError(s.name() + "." + key + ": unknown value '" + text + "'");
  return *v;
}

std::optional<ProjectionMode> parse_projection(std::string_view s) {
  if (s == "surface") return ProjectionMode::surface;
  if (s == "vertex") return ProjectionMode::vertex;
  return std::nullopt;
}

std::optional<RegularizerReference> parse_reference(std::string_view s) {
  if (s == "template") return RegularizerReference::template_shape;
  if (s == "ideal") return RegularizerReference::ideal;
  return std::nullopt;
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }
ojson optional_json(const std::optional<int>& v) { return v ? ojson(*v) : ojson(nullptr); }

}  // namespace

std::string_view report_format_name(ReportFormat f) { return f == ReportFormat::json ? "json" : "csv"; }

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  return std::nullopt;
}

void RunConfig::validate() const {
  templ.validate();
  warp.validate();
  if (refine_level < 2 || refine_level > 4) throw ValidationError("warp.refine_level must lie in [2, 4]");
  fit.validate();
  if (gradcheck.cases_per_loss < 1) throw ValidationError("eval.gradcheck.cases_per_loss must be positive");
  if (!(gradcheck.h > 0.0) || !(gradcheck.tolerance > 0.0) || !(gradcheck.margin >= 0.0) ||
      gradcheck.max_redraws < 0) {
    throw ValidationError("eval.gradcheck: step and tolerance must be positive, margin and redraws non-negative");
  }
  const std::string o = out.string();
  if (o.empty() || o.find('\0') != std::string::npos) throw ValidationError("io.out: invalid path");
}

ojson config_to_json(const RunConfig& c) {
  ojson j;
  j["template"] = {{"radius", c.templ.radius},
                   {"height", c.templ.height},
                   {"circumferential", c.templ.circumferential},
                   {"axial", c.templ.axial},
                   {"leaflet_radial", c.templ.leaflet_radial},
                   {"leaflet_angular", optional_json(c.templ.leaflet_angular)}};
  j["warp"] = {{"kind", std::string(warp_kind_name(c.warp.kind))},
               {"bulge", c.warp.bulge},
               {"twist_deg", c.warp.twist_deg},
               {"scale", {c.warp.scale.x(), c.warp.scale.y(), c.warp.scale.z()}},
               {"seed", c.warp.seed},
               {"refine_level", c.refine_level}};
  const FitConfig& f = c.fit;
  ojson alpha = ojson::object();
  for (const auto& [k, v] : f.weights.alpha) alpha[k] = v;
  j["fit"] = {{"n0", f.n0},
              {"n1", f.n1},
              {"n2", f.n2},
              {"n3", f.n3},
              {"alpha", alpha},
              {"lambda", f.weights.lambda},
              {"reference", f.reference == RegularizerReference::template_shape ? "template" : "ideal"},
              {"learning_rate_boundary", optional_json(f.learning_rate_boundary)},
              {"learning_rate_interior", optional_json(f.learning_rate_interior)},
              {"lr_final_fraction", f.lr_final_fraction},
              {"beta1", f.beta1},
              {"beta2", f.beta2},
              {"adam_epsilon", f.adam_epsilon},
              {"omega", f.omega},
              {"projection", f.projection == ProjectionMode::surface ? "surface" : "vertex"},
              {"boundary_snap_weight", f.boundary_snap_weight},
              {"chamfer_sample_count", optional_json(f.chamfer_sample_count)},
              {"chamfer_bidirectional", f.chamfer_bidirectional},
              {"seed", f.seed}};
  const GradcheckOptions& g = c.gradcheck;
  j["eval"] = {{"gradcheck",
                {{"cases_per_loss", g.cases_per_loss},
                 {"h", g.h},
                 {"tolerance", g.tolerance},
                 {"margin", g.margin},
                 {"max_redraws", g.max_redraws},
                 {"seed", g.seed}}}};
  j["io"] = {{"format", std::string(mesh_format_name(c.format))},
             {"report", std::string(report_format_name(c.report))},
             {"out", c.out.string()}};
  return j;
}

RunConfig config_from_json(const ojson& j) {
  RunConfig c;
  Section root(j, "config");
  if (root.has("template")) {
    Section s(root.at("template"), "template");
    s.get("radius", c.templ.radius);
    s.get("height", c.templ.height);
    s.get("circumferential", c.templ.circumferential);
    s.get("axial", c.templ.axial);
    s.get("leaflet_radial", c.templ.leaflet_radial);
    s.get("leaflet_angular", c.templ.leaflet_angular);
    s.finish();
  }
  if (root.has("warp")) {
    Section s(root.at("warp"), "warp");
    std::string kind(warp_kind_name(c.warp.kind));
    s.get("kind", kind);
    c.warp.kind = enum_value(s, "kind", kind, parse_warp_kind);
    s.get("bulge", c.warp.bulge);
    s.get("twist_deg", c.warp.twist_deg);
    s.get("scale", c.warp.scale);
    s.get("seed", c.warp.seed);
    s.get("refine_level", c.refine_level);
    s.finish();
  }
  if (root.has("fit")) {
    Section s(root.at("fit"), "fit");
    FitConfig& f = c.fit;
    s.get("n0", f.n0);
    s.get("n1", f.n1);
    s.get("n2", f.n2);
    s.get("n3", f.n3);
    if (s.has("alpha")) {
      Section a(s.at("alpha"), "fit.alpha");
      for (auto& [k, v] : f.weights.alpha) a.get(k.c_str(), v);
      a.finish();
    }
    s.get("lambda", f.weights.lambda);
    std::string ref = f.reference == RegularizerReference::template_shape ? "template" : "ideal";
    s.get("reference", ref);
    f.reference = enum_value(s, "reference", ref, parse_reference);
    s.get("learning_rate_boundary", f.learning_rate_boundary);
    s.get("learning_rate_interior", f.learning_rate_interior);
    s.get("lr_final_fraction", f.lr_final_fraction);
    s.get("beta1", f.beta1);
    s.get("beta2", f.beta2);
    s.get("adam_epsilon", f.adam_epsilon);
    s.get("omega", f.omega);
    std::string proj = f.projection == ProjectionMode::surface ? "surface" : "vertex";
    s.get("projection", proj);
    f.projection = enum_value(s, "projection", proj, parse_projection);
    s.get("boundary_snap_weight", f.boundary_snap_weight);
    s.get("chamfer_sample_count", f.chamfer_sample_count);
    s.get("chamfer_bidirectional", f.chamfer_bidirectional);
    s.get("seed", f.seed);
    s.finish();
  }
  if (root.has("eval")) {
    Section s(root.at("eval"), "eval");
    if (s.has("gradcheck")) {
      Section g(s.at("gradcheck"), "eval.gradcheck");
      g.get("cases_per_loss", c.gradcheck.cases_per_loss);
      g.get("h", c.gradcheck.h);
      g.get("tolerance", c.gradcheck.tolerance);
      g.get("margin", c.gradcheck.margin);
      g.get("max_redraws", c.gradcheck.max_redraws);
      g.get("seed", c.gradcheck.seed);
      g.finish();
    }
    s.finish();
  }
  if (root.has("io")) {
    Section s(root.at("io"), "io");
    std::string fmt(mesh_format_name(c.format)), rep(report_format_name(c.report)), out = c.out.string();
    s.get("format", fmt);
    s.get("report", rep);
    s.get("out", out);
    c.format = enum_value(s, "format", fmt, parse_mesh_format);
    c.report = enum_value(s, "report", rep, parse_report_format);
    c.out = out;
    s.finish();
  }
  root.finish();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw ParseError(path.string(), line, "invalid JSON");
  }
  return config_from_json(j);
}

std::string default_config_text() { return config_to_json(RunConfig{}).dump(2) + "\n"; }

}  // namespace quadfit
