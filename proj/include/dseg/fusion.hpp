#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dseg/core.hpp"
#include "dseg/embedding.hpp"
#include "json.hpp"

namespace dseg {

struct Corpus;

struct MemoryEntry {
  std::string session_id;
  std::size_t index = 0;  // utterance position within the session
  std::string move;
  std::vector<double> embedding;
};

// Labeled utterance embeddings used as retrieval memory. Immutable once built.
struct MemoryBank {
  std::size_t dim = 0;
  std::vector<MemoryEntry> entries;

  std::size_t size() const { return entries.size(); }
};

enum class MoveTableMode {
  kCentroid,  // e_m = normalized mean of the bank embeddings labeled m
  kRandom,    // e_m = normalized standard-normal draw seeded by (seed, m)
};

const char* to_string(MoveTableMode mode);
MoveTableMode parse_move_table_mode(const std::string& text);

// One row per codebook move, in codebook order.
struct MoveEmbeddingTable {
  std::vector<std::string> moves;
  std::size_t dim = 0;
  std::vector<double> rows;
  MoveTableMode mode = MoveTableMode::kCentroid;
  std::uint64_t seed = 0;

  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
  std::optional<std::size_t> index_of(const std::string& move) const;
};

struct FusionParams {
  std::size_t k_ret = 5;
  double tau = 0.1;
  double alpha_fuse = 0.5;
  std::uint64_t seed = 0;
  bool exclude_self = true;
  MoveTableMode table_mode = MoveTableMode::kCentroid;

  void validate() const;
  nlohmann::json to_json() const;
  static FusionParams from_json(const nlohmann::json& j);
};

struct Neighbor {
  std::size_t entry = 0;  // position in the bank
  std::string move;
  double similarity = 0.0;
};

// One entry per labeled utterance of `rater_id`, sessions in corpus order then
// utterance order. Throws when a labeled session lacks embeddings or nothing
// is labeled.
MemoryBank build_memory(const Corpus& corpus, const std::string& rater_id);

MoveEmbeddingTable build_move_table(const Codebook& codebook, const MemoryBank& bank, MoveTableMode mode,
                                    std::uint64_t seed);

struct SelfKey {
  std::string session_id;
  std::size_t index = 0;
};

// Exact linear scan: the min(k, candidates) most similar entries, ties kept in
// bank order. `exclude` removes the query's own bank entry.
std::vector<Neighbor> retrieve_topk(std::span<const double> query, const MemoryBank& bank, std::size_t k,
                                    const std::optional<SelfKey>& exclude = std::nullopt);

// Temperature softmax with max subtraction. Throws DomainError for tau <= 0.
std::vector<double> attention_weights(std::span<const double> similarities, double tau);

// Sum of weights[k] * table row of neighbors[k].move.
std::vector<double> aggregate_move_vector(std::span<const Neighbor> neighbors, std::span<const double> weights,
                                          const MoveEmbeddingTable& table);

// norm(h + alpha * r). Returns h unchanged when alpha is 0 or the sum vanishes;
// `degenerate` is set in the latter case.
std::vector<double> fuse(std::span<const double> h, std::span<const double> r, double alpha,
                         bool* degenerate = nullptr);

struct FusionDiagnostics {
  std::size_t clamped_queries = 0;  // k_ret exceeded the available entries
  std::size_t degenerate = 0;       // h + alpha r was the zero vector
};

EmbeddingSequence fused_embeddings(const EmbeddingSequence& emb, const MemoryBank& bank,
                                   const MoveEmbeddingTable& table, const FusionParams& params,
                                   FusionDiagnostics* diagnostics = nullptr);

std::string serialize_memory_bank(const MemoryBank& bank, ContainerEncoding encoding);
MemoryBank parse_memory_bank(std::string_view bytes);
std::string serialize_move_table(const MoveEmbeddingTable& table, ContainerEncoding encoding);
MoveEmbeddingTable parse_move_table(std::string_view bytes);

}  // namespace dseg
