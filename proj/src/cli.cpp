#include "quadfit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quadfit/config.hpp"
#include "quadfit/errors.hpp"
#include "quadfit/fitter.hpp"
#include "quadfit/gradcheck.hpp"
#include "quadfit/io.hpp"
#include "quadfit/metrics.hpp"
#include "quadfit/report.hpp"
#include "quadfit/synth.hpp"

namespace quadfit {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  std::string report;
  bool print_defaults = false;
};

RunConfig effective_config(const GlobalFlags& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) {
    c.fit.seed = *g.seed;
    c.warp.seed = *g.seed;
    c.gradcheck.seed = *g.seed;
  }
  if (!g.out.empty()) c.out = g.out;
  if (!g.format.empty()) c.format = *parse_mesh_format(g.format);
  if (!g.report.empty()) c.report = *parse_report_format(g.report);
  c.validate();
  fs::create_directories(c.out);
  return c;
}

fs::path output(const RunConfig& c, const std::string& stem) {
  return c.out / (stem + "." + std::string(mesh_format_extension(c.format)));
}

// Writes a per-case report in the selected format; returns its path.
fs::path write_report(const RunConfig& c, const std::string& stem, const ojson& json,
                      const std::vector<MetricRow>& rows) {
  const fs::path p = c.out / (stem + "." + std::string(report_format_name(c.report)));
  write_text(p, c.report == ReportFormat::json ? json.dump(2) + "\n" : rows_csv(rows));
  return p;
}

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

QuadMesh load_quad(const std::string& path, bool require_sidecar) {
  return read_quad_mesh(path, format_from_path(path), require_sidecar);
}

int cmd_template(const RunConfig& c, std::ostream& out) {
  const QuadMesh t = gen_template(c.templ);
  const fs::path p = output(c, "template");
  write_mesh(t, p, c.format);
  out << "template: " << t.vertices.size() << " vertices, " << t.quads.size() << " quads -> " << p.string()
      << "\n";
  return kExitOk;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  const QuadMesh t = gen_template(c.templ);
  const SyntheticCase sc = gen_target(t, c.warp, c.refine_level);
  write_mesh(t, output(c, "template"), c.format);
  write_mesh(sc.target, output(c, "target"), c.format);
  write_mesh(sc.truth, output(c, "truth"), c.format);
  write_constraints(sc.constraints, c.out / "constraints.json");

  const Box box = bounding_box(t.vertices);
  const Warp warp(c.warp, box);
  const double jmin = min_jacobian_determinant(warp, box, 4096, c.warp.seed);
  ojson j;
  j["kind"] = "synth";
  j["warp"] = {{"kind", std::string(warp_kind_name(c.warp.kind))},
               {"bulge", report_number(warp.bulge())},
               {"lobe", report_number(warp.lobe())},
               {"phase_rad", report_number(warp.phase())},
               {"twist_rad", report_number(warp.twist_rad())},
               {"scale", {report_number(warp.scale().x()), report_number(warp.scale().y()),
                          report_number(warp.scale().z())}}};
  j["refine_level"] = c.refine_level;
  j["target_vertices"] = sc.target.vertices.size();
  j["target_triangles"] = sc.target.triangles.size();
  j["refinement_error_mm"] = report_number(sc.refinement_error);
  j["min_jacobian_determinant"] = report_number(jmin);
  const std::vector<MetricRow> rows = {
      {"synth", "refinement_error_mm", sc.refinement_error},
      {"synth", "min_jacobian_determinant", jmin},
      {"synth", "target_triangles", static_cast<double>(sc.target.triangles.size())}};
  write_report(c, "synth", j, rows);
  out << "synth: " << sc.target.triangles.size() << " target triangles, refinement error "
      << fmt("%.3g", sc.refinement_error) << " mm -> " << c.out.string() << "\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& c, const std::string& templ_path, const std::string& target_path,
            const std::string& constraints_path, const std::string& truth_path, std::ostream& out) {
  const QuadMesh t = load_quad(templ_path, false);
  const TriSurface target = read_tri_surface(target_path, format_from_path(target_path));
  const BoundaryConstraintSet cons = read_constraints(constraints_path);
  std::optional<QuadMesh> truth;
  if (!truth_path.empty()) truth = load_quad(truth_path, false);
  FitResult r;
  try {
    r = run_pipeline(t, target, cons, c.fit, truth ? &*truth : nullptr);
  } catch (const DivergenceError& e) {
    QuadMesh last = t;
    last.vertices = e.last_state();
    if (last.vertices.size() == t.vertices.size()) write_mesh(last, output(c, "diverged"), c.format);
    throw;
  }
  const fs::path mp = output(c, "fitted");
  write_mesh(r.mesh, mp, c.format);
  const fs::path rp = write_report(c, "fit_report", fit_report_json(r.report), fit_rows(r.report));
  out << "fit: surface chamfer " << fmt("%.6g", r.report.surface_chamfer_affine) << " -> "
      << fmt("%.6g", r.report.surface_chamfer) << " mm";
  if (r.report.metrics) out << ", APPD " << fmt("%.6g", r.report.metrics->regions.at(Region::whole).appd) << " mm";
  out << ", inverted quads " << r.report.quality.inverted << " -> " << mp.string() << ", " << rp.string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& c, const std::string& pred_path, const std::string& truth_path,
             std::ostream& out) {
  const QuadMesh pred = load_quad(pred_path, false);
  const QuadMesh truth = load_quad(truth_path, false);
  const MetricsReport m = evaluate(pred, truth);
  const fs::path rp = write_report(c, "eval", metrics_json(m), report_rows(m));
  const RegionMetrics& w = m.regions.at(Region::whole);
  out << "eval: APPD " << fmt("%.6g", w.appd) << " mm, CD " << fmt("%.6g", w.chamfer) << " mm, HD "
      << fmt("%.6g", w.hausdorff) << " mm -> " << rp.string() << "\n";
  return kExitOk;
}

int cmd_quality(const RunConfig& c, const std::string& mesh_path, std::ostream& out) {
  const QuadMesh m = load_quad(mesh_path, false);
  const QualityStats q = quality_report(m);
  MetricsReport rep;
  rep.quality = q;
  ojson j = quality_json(q);
  j["kind"] = "quality";
  j["rows"] = metrics_json(rep)["rows"];
  const fs::path rp = write_report(c, "quality", j, report_rows(rep));
  out << "quality: " << q.quads << " quads, " << q.inverted << " inverted, " << q.degenerate
      << " degenerate, max corner deviation " << fmt("%.3f", q.max_corner_deviation_deg) << " deg -> "
      << rp.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& c, const std::vector<std::string>& losses, int cases,
                  const std::string& corrupt, std::ostream& out) {
  GradcheckOptions o = c.gradcheck;
  o.losses = losses;
  if (cases > 0) o.cases_per_loss = cases;
  o.corrupt = corrupt;
  const GradcheckResult r = run_gradcheck(o);
  const fs::path p = c.out / ("gradcheck." + std::string(report_format_name(c.report)));
  write_text(p, c.report == ReportFormat::json ? gradcheck_json(r).dump(2) + "\n" : gradcheck_csv(r));
  std::vector<std::string> order;
  for (const GradcheckCase& gc : r.cases) {
    if (std::find(order.begin(), order.end(), gc.loss) == order.end()) order.push_back(gc.loss);
  }
  for (const std::string& l : order) {
    int n = 0, ok = 0;
    double worst = 0.0;
    for (const GradcheckCase& gc : r.cases) {
      if (gc.loss != l) continue;
      ++n;
      ok += gc.passed;
      worst = std::max(worst, gc.error);
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %2d/%2d passed, max relative error %.3g\n", l.c_str(), ok, n, worst);
    out << line;
  }
  out << "gradcheck: " << (r.passed() ? "PASS" : "FAIL") << " -> " << p.string() << "\n";
  return r.passed() ? kExitOk : kExitFailure;
}

int cmd_aggregate(const RunConfig& c, const std::string& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<MetricRow>> cases;
  for (const fs::path& f : files) {
    if (auto rows = read_metric_rows(f)) cases.push_back(std::move(*rows));
  }
  if (cases.empty()) throw ValidationError("aggregate: no per-case reports under '" + dir + "'");
  const auto rows = aggregate(cases);
  const fs::path p = c.out / ("aggregate." + std::string(report_format_name(c.report)));
  write_text(p, c.report == ReportFormat::json ? aggregate_json(rows, cases.size()).dump(2) + "\n"
                                               : aggregate_csv(rows));
  out << "aggregate: " << cases.size() << " cases, " << rows.size() << " rows -> " << p.string() << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured quad-mesh template fitting onto triangulated surfaces.", "quadfit"};
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config, "JSON config with sections template, warp, fit, eval, io")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for warps, sampling and gradcheck draws");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--format", g.format, "Mesh output format")->check(CLI::IsMember({"obj", "vtk"}));
  app.add_option("--report", g.report, "Report format")->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--print-defaults", g.print_defaults, "Print the default config and exit");
  app.require_subcommand(0, 1);

  app.add_subcommand("template", "Write the valve template mesh");
  app.add_subcommand("synth", "Write template, warped target, constraints and ground truth");

  auto* fit = app.add_subcommand("fit", "Fit the template to a target surface");
  std::string templ_path, target_path, constraints_path, truth_path;
  fit->add_option("--template", templ_path, "Template quad mesh")->required()->check(CLI::ExistingFile);
  fit->add_option("--target", target_path, "Target triangle surface")->required()->check(CLI::ExistingFile);
  fit->add_option("--constraints", constraints_path, "Boundary constraints JSON")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--truth", truth_path, "Ground-truth quad mesh for metrics")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Metrics between two corresponded quad meshes");
  std::string pred_path, eval_truth;
  eval->add_option("prediction", pred_path, "Predicted quad mesh")->required()->check(CLI::ExistingFile);
  eval->add_option("truth", eval_truth, "Ground-truth quad mesh")->required()->check(CLI::ExistingFile);

  auto* quality = app.add_subcommand("quality", "Element quality of a quad mesh");
  std::string quality_path;
  quality->add_option("mesh", quality_path, "Quad mesh")->required()->check(CLI::ExistingFile);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  std::vector<std::string> losses;
  int cases = 0;
  std::string corrupt;
  gradcheck->add_option("--loss", losses, "Loss to check (repeatable; default all)")
      ->check(CLI::IsMember(gradcheck_loss_names()));
  gradcheck->add_option("--cases", cases, "Random meshes per loss")->check(CLI::PositiveNumber);
  gradcheck->add_option("--corrupt-gradient", corrupt, "Test hook: perturb this loss's analytic gradient")
      ->check(CLI::IsMember(gradcheck_loss_names()))
      ->group("");

  auto* agg = app.add_subcommand("aggregate", "Mean and standard deviation over per-case reports");
  std::string agg_dir;
  agg->add_option("directory", agg_dir, "Directory searched recursively for reports")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  if (g.print_defaults) {
    out << default_config_text();
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    err << "error: a subcommand is required\n\n" << app.help();
    return kExitUsage;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    const RunConfig c = effective_config(g);
    if (cmd == "template") return cmd_template(c, out);
    if (cmd == "synth") return cmd_synth(c, out);
    if (cmd == "fit") return cmd_fit(c, templ_path, target_path, constraints_path, truth_path, out);
    if (cmd == "eval") return cmd_eval(c, pred_path, eval_truth, out);
    if (cmd == "quality") return cmd_quality(c, quality_path, out);
    if (cmd == "gradcheck") return cmd_gradcheck(c, losses, cases, corrupt, out);
    return cmd_aggregate(c, agg_dir, out);
  } catch (const DivergenceError& e) {
    err << "error: divergence at iteration " << e.iteration() << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace quadfit
