#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dseg/core.hpp"
#include "dseg/embedding.hpp"
#include "json.hpp"

namespace dseg {

struct SynthSpec {
  std::size_t sessions = 10;
  std::size_t t_min = 20;
  std::size_t t_max = 40;
  std::size_t k_min = 2;
  std::size_t k_max = 5;
  std::size_t moves = 4;  // C
  std::size_t dim = 16;
  // Adjacent segment centroids satisfy cos <= 1 - separation.
  double separation = 0.7;
  double rater_noise = 0.0;
  double unlabeled_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t min_segment_len = 3;
  // Scale of the per-utterance Gaussian offset from its segment centroid.
  double spread = 0.15;

  // Throws ConfigError for infeasible or out-of-range settings.
  void validate() const;
  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthSession {
  Dialogue dialogue;
  BoundarySet truth;
  std::vector<std::size_t> dominant_moves;  // per true segment, codebook index
  RaterLabels human;
  RaterLabels ai;
  EmbeddingSequence embeddings;
};

struct SynthCorpus {
  SynthSpec spec;
  Codebook codebook;
  std::vector<SynthSession> sessions;
};

inline constexpr const char* kSynthHumanRater = "human";
inline constexpr const char* kSynthAiRater = "ai";

// Deterministic in the spec: session s is drawn from its own generator seeded
// by (seed, s, attempt).
SynthCorpus generate(const SynthSpec& spec);

// Writes manifest.json, codebook.json, transcripts/, embeddings/, labels/,
// truth/ and synth_spec.json under `dir`. Returns the manifest path.
std::filesystem::path write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir,
                                         ContainerEncoding encoding = ContainerEncoding::kBinary);

}  // namespace dseg
