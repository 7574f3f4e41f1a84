#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadfit/fitter.hpp"
#include "quadfit/gradcheck.hpp"
#include "quadfit/metrics.hpp"
#include "quadfit/synth.hpp"

namespace quadfit {

// Reports store numbers rounded to 9 significant digits; non-finite values
// become null.
nlohmann::ordered_json report_number(double v);

nlohmann::ordered_json quality_json(const QualityStats& q);
// {"kind": "metrics", "regions": ..., "landmarks": ..., "quality": ..., "rows": [...]}
nlohmann::ordered_json metrics_json(const MetricsReport& r);
// {"kind": "fit", ..., "metrics": <metrics or null>, "affine_metrics": ...}
nlohmann::ordered_json fit_report_json(const FitReport& r);
nlohmann::ordered_json gradcheck_json(const GradcheckResult& r);
nlohmann::ordered_json aggregate_json(const std::vector<AggregateRow>& rows, std::size_t cases);

// Header "region,metric,value".
std::string rows_csv(const std::vector<MetricRow>& rows);
// Header "region,metric,mean,std,count".
std::string aggregate_csv(const std::vector<AggregateRow>& rows);
// Header "loss,case,mesh,vertices,redraws,value,error,passed".
std::string gradcheck_csv(const GradcheckResult& r);

// Scalar fit diagnostics as rows (region "fit") followed by the metric rows
// when a ground truth was given.
std::vector<MetricRow> fit_rows(const FitReport& r);

// Per-case metric rows from a report file written by `eval` or `fit` (JSON
// or CSV). Returns nullopt for files that are not per-case metric reports.
std::optional<std::vector<MetricRow>> read_metric_rows(const std::filesystem::path& path);

}  // namespace quadfit
