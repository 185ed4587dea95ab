#include "dseg/report.hpp"

#include <cstdio>

namespace dseg {

using nlohmann::json;

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metric_json(const MetricValue& m) {
  return {{"value", opt(m.value)}, {"dropped_segments", m.dropped_segments}};
}

json rater_json(const RaterMetrics& r) {
  return {{"entropy", metric_json(r.entropy)},
          {"purity", metric_json(r.purity)},
          {"adjacent_js", metric_json(r.adjacent_js)},
          {"bcr", metric_json(r.bcr)}};
}

}  // namespace

std::string format_mean(std::optional<double> value) { return value ? fixed(*value, 3) : "n/a"; }

std::string format_ci_bound(double value) { return fixed(value, 2); }

std::string format_aggregate(const Aggregate& agg) {
  std::string out = format_mean(agg.mean);
  if (agg.ci) out += " [" + format_ci_bound(agg.ci->lo) + ", " + format_ci_bound(agg.ci->hi) + "]";
  return out;
}

std::string format_granularity(const GranularityStats& g) {
  return fixed(g.mean, 2) + " (" + (g.sd ? fixed(*g.sd, 2) : std::string("n/a")) + ")";
}

std::string render_markdown(std::span<const MetricsReport> reports, ReportRater rater) {
  const std::string suffix = rater == ReportRater::kHuman ? "_human" : "_ai";
  std::string out;
  out += "| Method | Granularity: K Mean (SD) | Consistency: Entropy ↓ | Consistency: Purity ↑ | "
         "Distinctiveness: Adjacent JS ↑ | Distinctiveness: BCR ↑ | Rater Agreement: Human-AI JS ↓ |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out += "| " + r.method + " | " + format_granularity(r.granularity) + " | " +
           format_aggregate(r.aggregate("entropy" + suffix)) + " | " +
           format_aggregate(r.aggregate("purity" + suffix)) + " | " +
           format_aggregate(r.aggregate("adjacent_js" + suffix)) + " | " +
           format_aggregate(r.aggregate("bcr" + suffix)) + " | " + format_aggregate(r.aggregate("ha_js")) + " |\n";
  }
  return out;
}

std::string render_summary_csv(std::span<const MetricsReport> reports) {
  std::string out = "method,sessions,k_mean,k_sd";
  for (const char* key : kAggregateKeys) {
    out += std::string(",") + key + "_mean," + key + "_ci_lo," + key + "_ci_hi," + key + "_n";
  }
  out += "\n";
  for (const auto& r : reports) {
    out += r.method + "," + std::to_string(r.sessions.size()) + "," + csv_cell(r.granularity.mean) + "," +
           csv_cell(r.granularity.sd);
    for (const char* key : kAggregateKeys) {
      const auto& a = r.aggregate(key);
      out += "," + csv_cell(a.mean) + "," + csv_cell(a.ci ? std::optional(a.ci->lo) : std::nullopt) + "," +
             csv_cell(a.ci ? std::optional(a.ci->hi) : std::nullopt) + "," + std::to_string(a.n);
    }
    out += "\n";
  }
  return out;
}

std::string render_sessions_csv(std::span<const MetricsReport> reports) {
  std::string out =
      "method,session_id,T,K,entropy_human,purity_human,adjacent_js_human,bcr_human,"
      "entropy_ai,purity_ai,adjacent_js_ai,bcr_ai,ha_js\n";
  for (const auto& r : reports) {
    for (const auto& s : r.sessions) {
      out += r.method + "," + s.session_id + "," + std::to_string(s.utterances) + "," + std::to_string(s.segments);
      for (const auto* m : {&s.human, &s.ai}) {
        out += "," + csv_cell(m->entropy.value) + "," + csv_cell(m->purity.value) + "," +
               csv_cell(m->adjacent_js.value) + "," + csv_cell(m->bcr.value);
      }
      out += "," + csv_cell(s.ha_js.value) + "\n";
    }
  }
  return out;
}

json report_to_json(const MetricsReport& report) {
  json sessions = json::array();
  for (const auto& s : report.sessions) {
    sessions.push_back({{"session_id", s.session_id},
                        {"T", s.utterances},
                        {"K", s.segments},
                        {"human", rater_json(s.human)},
                        {"ai", rater_json(s.ai)},
                        {"ha_js", metric_json(s.ha_js)}});
  }
  json aggregates = json::object();
  for (const auto& [key, a] : report.aggregates) {
    aggregates[key] = {{"mean", opt(a.mean)},
                       {"ci", a.ci ? json::array({a.ci->lo, a.ci->hi}) : json(nullptr)},
                       {"n", a.n}};
  }
  const auto& c = report.config;
  return {{"format_version", 1},
          {"method", report.method},
          {"config",
           {{"human_rater", c.human_rater},
            {"ai_rater", c.ai_rater},
            {"unlabeled_mode", to_string(c.unlabeled)},
            {"normalized_adjacent_js", c.normalized_adjacent_js},
            {"ci_level", c.ci_level},
            {"ci_method", "percentile bootstrap over session values"},
            {"bootstrap_iterations", c.bootstrap_iterations},
            {"seed", c.seed}}},
          {"granularity", {{"k_mean", report.granularity.mean}, {"k_sd", opt(report.granularity.sd)}}},
          {"aggregates", aggregates},
          {"sessions", sessions}};
}

}  // namespace dseg
