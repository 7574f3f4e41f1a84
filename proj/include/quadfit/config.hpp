#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "quadfit/fitter.hpp"
#include "quadfit/gradcheck.hpp"
#include "quadfit/io.hpp"
#include "quadfit/synth.hpp"

namespace quadfit {

enum class ReportFormat { json, csv };

std::string_view report_format_name(ReportFormat f);
std::optional<ReportFormat> parse_report_format(std::string_view name);

struct RunConfig {
  TemplateSpec templ;
  WarpSpec warp;
  int refine_level = 3;
  FitConfig fit;
  GradcheckOptions gradcheck;
  MeshFormat format = MeshFormat::obj;
  ReportFormat report = ReportFormat::json;
  std::filesystem::path out = ".";

  // Throws ValidationError / ConfigError.
  void validate() const;
};

// Sections template, warp, fit, eval, io. Every key is written.
nlohmann::ordered_json config_to_json(const RunConfig& config);

// Overlays `j` on the defaults. Unknown keys and wrong types throw
// ConfigError; the result is validated.
RunConfig config_from_json(const nlohmann::ordered_json& j);

// Throws IoError, ParseError (bad JSON, with its line) or ConfigError.
RunConfig load_config(const std::filesystem::path& path);

// Pretty-printed defaults document.
std::string default_config_text();

}  // namespace quadfit
