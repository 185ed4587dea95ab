#pragma once

#include <optional>
#include <span>
#include <string>

#include "dseg/metrics.hpp"
#include "json.hpp"

namespace dseg {

enum class ReportRater { kHuman, kAi };

// Means to 3 decimals, CI bounds to 2, "n/a" for undefined values.
std::string format_mean(std::optional<double> value);
std::string format_ci_bound(double value);
// "0.447 [0.31, 0.59]"
std::string format_aggregate(const Aggregate& agg);
// "4.90 (1.71)"
std::string format_granularity(const GranularityStats& g);

// One row per report, columns grouped as Granularity | Consistency |
// Distinctiveness | Rater Agreement. Rater-specific columns use `rater`.
std::string render_markdown(std::span<const MetricsReport> reports, ReportRater rater = ReportRater::kHuman);
// Corpus-level CSV: one row per report, every aggregate for both raters.
std::string render_summary_csv(std::span<const MetricsReport> reports);
// Per-session CSV across all reports.
std::string render_sessions_csv(std::span<const MetricsReport> reports);
nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace dseg
