#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "dseg/coherence.hpp"
#include "dseg/fusion.hpp"
#include "dseg/ingest.hpp"
#include "dseg/llm.hpp"
#include "dseg/metrics.hpp"
#include "dseg/report.hpp"
#include "dseg/synth.hpp"
#include "json.hpp"

namespace dseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitPartial = 2;

// Replaces ${NAME} in every string value with the environment variable NAME.
// Unset variables raise ConfigError; "$${" escapes a literal "${".
nlohmann::json interpolate_env(const nlohmann::json& config);
// Reads a JSON run config and interpolates it.
nlohmann::json load_run_config(const std::filesystem::path& path);

// FNV digests of the manifest and the files it references; embedding files
// only when `with_embeddings` is set.
nlohmann::json input_digests(const std::filesystem::path& manifest_path, bool with_embeddings = true);

struct ValidateOptions {
  std::filesystem::path manifest;
  std::size_t jobs = 1;
};
int cmd_validate(const ValidateOptions& options, std::ostream& out, std::ostream& err);

enum class SegmentMethod { kCoherence, kCoherenceFused, kLlmGeneric, kLlmDa };
const char* to_string(SegmentMethod method);
SegmentMethod parse_segment_method(const std::string& text);

struct SegmentOptions {
  std::filesystem::path manifest;
  SegmentMethod method = SegmentMethod::kCoherence;
  std::filesystem::path out_dir;
  DecodeParams decode;
  FusionParams fusion;
  std::string memory_rater = "human";
  LlmClientConfig llm;
  std::size_t jobs = 1;
  bool allow_partial = false;
  // Used instead of an HTTP client when set.
  ChatClient* client = nullptr;
};
// Writes <out>/<session>.json per session plus <out>/run/{config,inputs,summary}.json
// (and audit.jsonl for LLM methods).
int cmd_segment(const SegmentOptions& options, std::ostream& out, std::ostream& err);

struct EvaluateInput {
  std::string name;  // row label; empty means the method recorded in the files
  std::filesystem::path dir;
};

struct EvaluateOptions {
  std::filesystem::path manifest;
  std::vector<EvaluateInput> inputs;
  std::filesystem::path out_dir;
  EvaluationConfig metrics;
  ReportRater table_rater = ReportRater::kHuman;
  bool allow_partial = false;
};
// Writes report.md, summary.csv, sessions.csv, report.json and run/ metadata.
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);

struct SynthOptions {
  SynthSpec spec;
  std::filesystem::path out_dir;
  ContainerEncoding encoding = ContainerEncoding::kBinary;
};
int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err);

struct AnnotateOptions {
  std::filesystem::path manifest;
  std::string rater_id = "ai";
  std::filesystem::path out_file;
  std::filesystem::path template_path;  // empty means the bundled template
  LlmClientConfig llm;
  std::size_t jobs = 1;
  bool allow_partial = false;
  ChatClient* client = nullptr;
};
// Labels every session with the LLM and writes one label file.
int cmd_annotate(const AnnotateOptions& options, std::ostream& out, std::ostream& err);

}  // namespace dseg
