#include <doctest.h>

#include <string>

#include "quadfit/config.hpp"
#include "quadfit/errors.hpp"
#include "quadfit/io.hpp"
#include "support.hpp"

using namespace quadfit;
using ojson = nlohmann::ordered_json;

namespace {

ojson parse(const char* text) { return ojson::parse(text); }

}  // namespace

TEST_CASE("defaults round trip") {
  const RunConfig d;
  CHECK_NOTHROW(d.validate());
  const ojson j = config_to_json(d);
  for (const char* section : {"template", "warp", "fit", "eval", "io"}) CHECK(j.contains(section));
  const RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(ojson::parse(default_config_text()) == j);
  CHECK(config_from_json(ojson::object()).fit.n2 == 300);
}

TEST_CASE("overlay of a partial document") {
  const RunConfig c = config_from_json(parse(R"({
    "template": {"circumferential": 24, "axial": 8},
    "warp": {"kind": "composite", "seed": 3, "refine_level": 2},
    "fit": {"n2": 10, "alpha": {"mc": 2.5}, "reference": "ideal", "projection": "vertex",
            "learning_rate_boundary": 0.05, "chamfer_sample_count": 100},
    "eval": {"gradcheck": {"cases_per_loss": 3}},
    "io": {"format": "vtk", "report": "csv", "out": "runs/a"}
  })"));
  CHECK(c.templ.circumferential == 24);
  CHECK(c.templ.radius == 12.0);
  CHECK(c.warp.kind == WarpKind::composite);
  CHECK(c.warp.seed == 3);
  CHECK(c.refine_level == 2);
  CHECK(c.fit.n2 == 10);
  CHECK(c.fit.n3 == 300);
  CHECK(c.fit.weights.a("mc") == 2.5);
  CHECK(c.fit.weights.a("flatness") == 0.5);
  CHECK(c.fit.reference == RegularizerReference::ideal);
  CHECK(c.fit.projection == ProjectionMode::vertex);
  CHECK(c.fit.learning_rate_boundary == 0.05);
  CHECK_FALSE(c.fit.learning_rate_interior.has_value());
  CHECK(c.fit.chamfer_sample_count == 100);
  CHECK(c.gradcheck.cases_per_loss == 3);
  CHECK(c.format == MeshFormat::vtk);
  CHECK(c.report == ReportFormat::csv);
  CHECK(c.out == std::filesystem::path("runs/a"));
}

TEST_CASE("strict parsing") {
  const char* bad[] = {
      R"({"fitt": {}})",
      R"({"fit": {"n4": 1}})",
      R"({"fit": {"alpha": {"smoothness": 1.0}}})",
      R"({"template": {"radius": "big"}})",
      R"({"fit": {"n2": 1.5}})",
      R"({"fit": {"n2": -1}})",
      R"({"fit": {"omega": 2.0}})",
      R"({"fit": {"reference": "other"}})",
      R"({"warp": {"kind": "wobble"}})",
      R"({"warp": {"kind": "radial_bulge", "bulge": 0.9}})",
      R"({"warp": {"scale": [1, 1]}})",
      R"({"warp": {"refine_level": 7}})",
      R"({"template": {"circumferential": 20}})",
      R"({"io": {"format": "stl"}})",
      R"({"io": {"report": "xml"}})",
      R"({"eval": {"gradcheck": {"h": 0}}})",
      R"({"eval": {"metrics": {}}})",
      R"([1, 2])",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(config_from_json(parse(text)), ConfigError);
  }
}

TEST_CASE("config files") {
  const auto dir = test::scratch_dir("config");
  write_text(dir / "ok.json", R"({"fit": {"seed": 9}})");
  CHECK(load_config(dir / "ok.json").fit.seed == 9);

  write_text(dir / "broken.json", "{\n  \"fit\": {\n    \"n2\": ,\n  }\n}\n");
  try {
    load_config(dir / "broken.json");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config(dir / "absent.json"), IoError);

  for (ReportFormat f : {ReportFormat::json, ReportFormat::csv}) CHECK(parse_report_format(report_format_name(f)) == f);
  CHECK_FALSE(parse_report_format("tsv").has_value());
}
