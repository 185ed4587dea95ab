#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dseg/commands.hpp"
#include "dseg/errors.hpp"

namespace {

using nlohmann::json;

template <typename T>
void override_with(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

json block(const json& config, const char* key) {
  auto it = config.find(key);
  return it == config.end() ? json::object() : *it;
}

// Top-level "seed" fills any block that does not set its own.
json seeded_block(const json& config, const char* key) {
  auto b = block(config, key);
  if (config.contains("seed") && !b.contains("seed")) b["seed"] = config["seed"];
  return b;
}

std::filesystem::path pick_path(const std::optional<std::string>& flag, const json& config, const char* key) {
  if (flag) return *flag;
  if (config.contains(key)) return config[key].get<std::string>();
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue segmentation and label-distribution evaluation"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "JSON run config; ${VAR} is read from the environment");

  std::optional<std::string> manifest, out_dir;
  std::optional<std::size_t> jobs;
  bool allow_partial = false;

  auto* validate = app.add_subcommand("validate", "Check a corpus manifest and everything it references");
  validate->add_option("--manifest", manifest, "Corpus manifest");
  validate->add_option("--jobs", jobs, "Worker threads");

  auto* segment = app.add_subcommand("segment", "Segment every session of a corpus");
  std::string method_name;
  segment->add_option("--method", method_name, "coherence | coherence-fused | llm-generic | llm-da")->required();
  segment->add_option("--manifest", manifest, "Corpus manifest");
  segment->add_option("--out", out_dir, "Output directory");
  segment->add_option("--jobs", jobs, "Sessions processed in parallel");
  segment->add_flag("--allow-partial", allow_partial, "Exit 0 even when some sessions fail");
  std::optional<std::size_t> window_size, pick_num, avg_seg_len, min_gap, smoothing, k_ret, max_retries, max_tokens;
  std::optional<double> alpha, tau, alpha_fuse, timeout, temperature;
  std::optional<std::uint64_t> fusion_seed;
  std::optional<std::string> memory_rater, table_mode, endpoint, model, api_key_env;
  std::optional<bool> include_self, strict_json, speakers;
  segment->add_option("--window-size", window_size, "Depth-score context window");
  segment->add_option("--alpha", alpha, "Threshold = mean + alpha * sd of depth scores");
  segment->add_option("--pick-num", pick_num, "Maximum boundaries per dialogue");
  segment->add_option("--avg-seg-len", avg_seg_len, "Cap boundaries at ceil(T / len) - 1 instead of --pick-num");
  segment->add_option("--min-gap", min_gap, "Minimum distance between boundaries");
  segment->add_option("--smoothing", smoothing, "Half-width of similarity smoothing (0 = off)");
  segment->add_option("--k-ret", k_ret, "Neighbors retrieved per utterance");
  segment->add_option("--tau", tau, "Attention temperature");
  segment->add_option("--alpha-fuse", alpha_fuse, "Fusion weight");
  segment->add_option("--fusion-seed", fusion_seed, "Seed for the random move table");
  segment->add_option("--memory-rater", memory_rater, "Rater whose labels fill the memory bank");
  segment->add_option("--table-mode", table_mode, "centroid | random");
  segment->add_option("--include-self", include_self, "Let an utterance retrieve its own memory entry");
  segment->add_option("--endpoint", endpoint, "Chat-completion URL");
  segment->add_option("--model", model, "Model identifier");
  segment->add_option("--api-key-env", api_key_env, "Environment variable holding the bearer token");
  segment->add_option("--timeout", timeout, "Per-request timeout in seconds");
  segment->add_option("--max-retries", max_retries, "Extra attempts after a failed call or parse");
  segment->add_option("--temperature", temperature, "Sampling temperature");
  segment->add_option("--max-tokens", max_tokens, "Completion token limit");
  segment->add_option("--strict-json", strict_json, "Require the reply to be exactly one JSON object");
  segment->add_option("--speakers", speakers, "Show speaker names in the turn listing");

  auto* evaluate = app.add_subcommand("evaluate", "Score segmentations against rater labels");
  std::vector<std::string> seg_dirs;
  std::optional<std::string> human_rater, ai_rater, unlabeled, table_rater;
  std::optional<bool> normalized_adj;
  std::optional<double> ci_level;
  std::optional<std::size_t> bootstrap;
  std::optional<std::uint64_t> metrics_seed;
  evaluate->add_option("--manifest", manifest, "Corpus manifest");
  evaluate->add_option("--segmentations", seg_dirs, "Segmentation directories, optionally NAME=DIR")->required();
  evaluate->add_option("--out", out_dir, "Report directory");
  evaluate->add_option("--jobs", jobs, "Worker threads");
  evaluate->add_flag("--allow-partial", allow_partial, "Evaluate only the sessions that were segmented");
  evaluate->add_option("--human-rater", human_rater, "Reference rater id");
  evaluate->add_option("--ai-rater", ai_rater, "Second rater id");
  evaluate->add_option("--unlabeled", unlabeled, "none-category | exclude");
  evaluate->add_option("--normalized-adjacent-js", normalized_adj, "Rescale adjacent-pair weights to sum to one");
  evaluate->add_option("--ci-level", ci_level, "Confidence level");
  evaluate->add_option("--bootstrap", bootstrap, "Bootstrap resamples");
  evaluate->add_option("--seed", metrics_seed, "Bootstrap seed");
  evaluate->add_option("--table-rater", table_rater, "Rater shown in the Markdown table: human | ai");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted boundaries");
  std::optional<std::string> spec_path;
  std::optional<std::uint64_t> synth_seed;
  bool json_embeddings = false;
  synth->add_option("--spec", spec_path, "Synth spec JSON (defaults used when absent)");
  synth->add_option("--out", out_dir, "Output directory");
  synth->add_option("--seed", synth_seed, "Overrides the spec seed");
  synth->add_flag("--json-embeddings", json_embeddings, "Write embeddings as JSON instead of binary");

  auto* annotate = app.add_subcommand("annotate", "Label utterances with an LLM");
  std::optional<std::string> rater_id, template_path, labels_out;
  annotate->add_option("--manifest", manifest, "Corpus manifest");
  annotate->add_option("--rater", rater_id, "Rater id for the produced labels");
  annotate->add_option("--out", labels_out, "Label file to write")->required();
  annotate->add_option("--template", template_path, "Annotation prompt template");
  annotate->add_option("--jobs", jobs, "Sessions processed in parallel");
  annotate->add_flag("--allow-partial", allow_partial, "Exit 0 even when some sessions fail");
  annotate->add_option("--endpoint", endpoint, "Chat-completion URL");
  annotate->add_option("--model", model, "Model identifier");
  annotate->add_option("--api-key-env", api_key_env, "Environment variable holding the bearer token");
  annotate->add_option("--max-retries", max_retries, "Extra attempts after a failed call or parse");
  annotate->add_option("--timeout", timeout, "Per-request timeout in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? dseg::kExitOk : dseg::kExitInvalid;
  }

  try {
    const json config = config_path ? dseg::load_run_config(*config_path) : json::object();
    const std::size_t n_jobs = jobs.value_or(config.value("jobs", std::size_t{1}));

    auto llm_config = [&] {
      auto c = dseg::LlmClientConfig::from_json(block(config, "llm"));
      override_with(c.endpoint, endpoint);
      override_with(c.model, model);
      override_with(c.api_key_env, api_key_env);
      override_with(c.timeout_seconds, timeout);
      override_with(c.max_retries, max_retries);
      override_with(c.temperature, temperature);
      override_with(c.max_tokens, max_tokens);
      override_with(c.strict_json, strict_json);
      override_with(c.include_speakers, speakers);
      c.validate();
      return c;
    };

    if (validate->parsed()) {
      dseg::ValidateOptions o{pick_path(manifest, config, "manifest"), n_jobs};
      if (o.manifest.empty()) throw dseg::ConfigError("--manifest is required");
      return dseg::cmd_validate(o, std::cout, std::cerr);
    }
    if (segment->parsed()) {
      dseg::SegmentOptions o;
      o.manifest = pick_path(manifest, config, "manifest");
      if (o.manifest.empty()) throw dseg::ConfigError("--manifest is required");
      o.out_dir = pick_path(out_dir, config, "output_dir");
      o.method = dseg::parse_segment_method(method_name);
      o.decode = dseg::DecodeParams::from_json(block(config, "decode"));
      override_with(o.decode.window_size, window_size);
      override_with(o.decode.alpha, alpha);
      if (pick_num) o.decode.pick_num = pick_num;
      override_with(o.decode.min_gap, min_gap);
      override_with(o.decode.smoothing_window, smoothing);
      if (avg_seg_len) o.decode.avg_seg_len = avg_seg_len;
      o.fusion = dseg::FusionParams::from_json(seeded_block(config, "fusion"));
      override_with(o.fusion.k_ret, k_ret);
      override_with(o.fusion.tau, tau);
      override_with(o.fusion.alpha_fuse, alpha_fuse);
      override_with(o.fusion.seed, fusion_seed);
      if (table_mode) o.fusion.table_mode = dseg::parse_move_table_mode(*table_mode);
      if (include_self) o.fusion.exclude_self = !*include_self;
      o.memory_rater = memory_rater.value_or(block(config, "fusion").value("memory_rater", o.memory_rater));
      if (o.method == dseg::SegmentMethod::kLlmGeneric || o.method == dseg::SegmentMethod::kLlmDa) {
        o.llm = llm_config();
      }
      o.jobs = n_jobs;
      o.allow_partial = allow_partial;
      return dseg::cmd_segment(o, std::cout, std::cerr);
    }
    if (evaluate->parsed()) {
      dseg::EvaluateOptions o;
      o.manifest = pick_path(manifest, config, "manifest");
      if (o.manifest.empty()) throw dseg::ConfigError("--manifest is required");
      o.out_dir = pick_path(out_dir, config, "output_dir");
      for (const auto& s : seg_dirs) {
        auto eq = s.find('=');
        if (eq == std::string::npos) {
          o.inputs.push_back({"", s});
        } else {
          o.inputs.push_back({s.substr(0, eq), s.substr(eq + 1)});
        }
      }
      const auto m = seeded_block(config, "metrics");
      o.metrics.human_rater = human_rater.value_or(m.value("human_rater", o.metrics.human_rater));
      o.metrics.ai_rater = ai_rater.value_or(m.value("ai_rater", o.metrics.ai_rater));
      o.metrics.unlabeled =
          dseg::parse_unlabeled_mode(unlabeled.value_or(m.value("unlabeled", std::string("none-category"))));
      o.metrics.normalized_adjacent_js =
          normalized_adj.value_or(m.value("normalized_adjacent_js", o.metrics.normalized_adjacent_js));
      o.metrics.ci_level = ci_level.value_or(m.value("ci_level", o.metrics.ci_level));
      o.metrics.bootstrap_iterations =
          bootstrap.value_or(m.value("bootstrap_iterations", o.metrics.bootstrap_iterations));
      o.metrics.seed = metrics_seed.value_or(m.value("seed", o.metrics.seed));
      o.metrics.jobs = n_jobs;
      const auto tr = table_rater.value_or(m.value("table_rater", std::string("human")));
      if (tr != "human" && tr != "ai") throw dseg::ConfigError("--table-rater must be human or ai");
      o.table_rater = tr == "human" ? dseg::ReportRater::kHuman : dseg::ReportRater::kAi;
      o.allow_partial = allow_partial;
      return dseg::cmd_evaluate(o, std::cout, std::cerr);
    }
    if (synth->parsed()) {
      dseg::SynthOptions o;
      json spec = spec_path ? dseg::load_run_config(*spec_path) : seeded_block(config, "synth");
      spec.erase("format_version");
      if (synth_seed) spec["seed"] = *synth_seed;
      o.spec = dseg::SynthSpec::from_json(spec);
      o.out_dir = pick_path(out_dir, config, "output_dir");
      o.encoding = json_embeddings ? dseg::ContainerEncoding::kJson : dseg::ContainerEncoding::kBinary;
      return dseg::cmd_synth(o, std::cout, std::cerr);
    }
    if (annotate->parsed()) {
      dseg::AnnotateOptions o;
      o.manifest = pick_path(manifest, config, "manifest");
      if (o.manifest.empty()) throw dseg::ConfigError("--manifest is required");
      o.rater_id = rater_id.value_or(o.rater_id);
      o.out_file = *labels_out;
      if (template_path) o.template_path = *template_path;
      o.llm = llm_config();
      o.jobs = n_jobs;
      o.allow_partial = allow_partial;
      return dseg::cmd_annotate(o, std::cout, std::cerr);
    }
  } catch (const dseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid configuration value: " << e.what() << "\n";
  }
  return dseg::kExitInvalid;
}
