#include "dseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dseg/errors.hpp"
#include "dseg/ingest.hpp"
#include "dseg/util.hpp"

namespace dseg {

using nlohmann::json;

const char* to_string(MoveTableMode mode) { return mode == MoveTableMode::kCentroid ? "centroid" : "random"; }

MoveTableMode parse_move_table_mode(const std::string& text) {
  if (text == "centroid") return MoveTableMode::kCentroid;
  if (text == "random") return MoveTableMode::kRandom;
  throw ConfigError("unknown move table mode '" + text + "' (expected centroid or random)");
}

std::optional<std::size_t> MoveEmbeddingTable::index_of(const std::string& move) const {
  auto it = std::find(moves.begin(), moves.end(), move);
  if (it == moves.end()) return std::nullopt;
  return static_cast<std::size_t>(it - moves.begin());
}

void FusionParams::validate() const {
  if (k_ret < 1) throw ConfigError("k_ret must be at least 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be a positive finite number");
  if (!(alpha_fuse >= 0.0) || !std::isfinite(alpha_fuse)) throw ConfigError("alpha_fuse must be finite and >= 0");
}

json FusionParams::to_json() const {
  return {{"k_ret", k_ret},
          {"tau", tau},
          {"alpha_fuse", alpha_fuse},
          {"seed", seed},
          {"exclude_self", exclude_self},
          {"table_mode", to_string(table_mode)}};
}

FusionParams FusionParams::from_json(const json& j) {
  FusionParams p;
  if (!j.is_object()) return p;
  p.k_ret = j.value("k_ret", p.k_ret);
  p.tau = j.value("tau", p.tau);
  p.alpha_fuse = j.value("alpha_fuse", p.alpha_fuse);
  p.seed = j.value("seed", p.seed);
  p.exclude_self = j.value("exclude_self", p.exclude_self);
  if (j.contains("table_mode")) p.table_mode = parse_move_table_mode(j["table_mode"].get<std::string>());
  p.validate();
  return p;
}

MemoryBank build_memory(const Corpus& corpus, const std::string& rater_id) {
  MemoryBank bank;
  for (const auto& s : corpus.sessions) {
    auto labels = corpus.labels_for(rater_id, s.dialogue.session_id);
    if (labels.labels.empty()) continue;
    if (!s.embeddings) {
      throw ValidationError("session '" + s.dialogue.session_id + "' has labels but no embeddings");
    }
    const auto& emb = *s.embeddings;
    if (bank.dim == 0) bank.dim = emb.dim;
    if (emb.dim != bank.dim) {
      throw ValidationError("session '" + s.dialogue.session_id + "' embedding dimension " +
                            std::to_string(emb.dim) + " differs from " + std::to_string(bank.dim));
    }
    for (const auto& [index, move] : labels.labels) {
      auto row = emb.row(index);
      bank.entries.push_back({s.dialogue.session_id, index, move, std::vector<double>(row.begin(), row.end())});
    }
  }
  if (bank.entries.empty()) throw ValidationError("fusion requires a non-empty memory");
  return bank;
}

MoveEmbeddingTable build_move_table(const Codebook& codebook, const MemoryBank& bank, MoveTableMode mode,
                                    std::uint64_t seed) {
  if (bank.dim == 0) throw ValidationError("memory bank has no dimension");
  MoveEmbeddingTable table;
  table.dim = bank.dim;
  table.mode = mode;
  table.seed = seed;
  table.rows.assign(codebook.moves.size() * bank.dim, 0.0);
  for (std::size_t m = 0; m < codebook.moves.size(); ++m) {
    table.moves.push_back(codebook.moves[m].name);
    std::span<double> row(table.rows.data() + m * bank.dim, bank.dim);
    if (mode == MoveTableMode::kCentroid) {
      for (const auto& e : bank.entries) {
        if (e.move != codebook.moves[m].name) continue;
        for (std::size_t i = 0; i < bank.dim; ++i) row[i] += e.embedding[i];
      }
    } else {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(m)};
      std::mt19937_64 gen(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& x : row) x = normal(gen);
    }
    // A move absent from the bank keeps a zero centroid; it can never be retrieved.
    double n = l2_norm(row);
    if (n > 0.0) {
      for (double& x : row) x /= n;
    }
  }
  return table;
}

std::vector<Neighbor> retrieve_topk(std::span<const double> query, const MemoryBank& bank, std::size_t k,
                                    const std::optional<SelfKey>& exclude) {
  if (bank.entries.empty()) throw ValidationError("retrieval from an empty memory bank");
  if (query.size() != bank.dim) {
    throw ValidationError("query dimension " + std::to_string(query.size()) + " differs from bank dimension " +
                          std::to_string(bank.dim));
  }
  std::vector<Neighbor> scored;
  scored.reserve(bank.entries.size());
  for (std::size_t j = 0; j < bank.entries.size(); ++j) {
    const auto& e = bank.entries[j];
    if (exclude && e.session_id == exclude->session_id && e.index == exclude->index) continue;
    scored.push_back({j, e.move, dot(query, e.embedding)});
  }
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.entry < b.entry;
                    });
  scored.resize(take);
  return scored;
}

std::vector<double> attention_weights(std::span<const double> similarities, double tau) {
  if (!(tau > 0.0)) throw DomainError("softmax temperature must be positive");
  if (similarities.empty()) throw DomainError("attention over zero similarities");
  const double top = *std::max_element(similarities.begin(), similarities.end());
  std::vector<double> w(similarities.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp((similarities[i] - top) / tau);
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

std::vector<double> aggregate_move_vector(std::span<const Neighbor> neighbors, std::span<const double> weights,
                                          const MoveEmbeddingTable& table) {
  if (neighbors.size() != weights.size()) throw ValidationError("neighbors and weights differ in length");
  std::vector<double> r(table.dim, 0.0);
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    auto m = table.index_of(neighbors[k].move);
    if (!m) throw ValidationError("move '" + neighbors[k].move + "' missing from the move embedding table");
    auto row = table.row(*m);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += weights[k] * row[i];
  }
  return r;
}

std::vector<double> fuse(std::span<const double> h, std::span<const double> r, double alpha, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (h.size() != r.size()) throw ValidationError("fusion of vectors with different dimensions");
  for (double x : r) {
    if (!std::isfinite(x)) throw ValidationError("non-finite move vector");
  }
  std::vector<double> out(h.begin(), h.end());
  if (alpha == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * r[i];
  double n = l2_norm(out);
  if (n == 0.0 || !std::isfinite(n)) {
    if (degenerate) *degenerate = true;
    return {h.begin(), h.end()};
  }
  for (double& x : out) x /= n;
  return out;
}

EmbeddingSequence fused_embeddings(const EmbeddingSequence& emb, const MemoryBank& bank,
                                   const MoveEmbeddingTable& table, const FusionParams& params,
                                   FusionDiagnostics* diagnostics) {
  params.validate();
  if (bank.entries.empty()) throw ValidationError("fusion requires a non-empty memory");
  if (emb.dim != bank.dim || table.dim != bank.dim) {
    throw ValidationError("embedding, memory and move table dimensions disagree");
  }
  FusionDiagnostics diag;
  EmbeddingSequence out = emb;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    std::optional<SelfKey> self;
    if (params.exclude_self) self = SelfKey{emb.session_id, i};
    auto neighbors = retrieve_topk(emb.row(i), bank, params.k_ret, self);
    if (neighbors.empty()) throw ValidationError("memory bank holds only the query itself");
    if (neighbors.size() < params.k_ret) ++diag.clamped_queries;
    std::vector<double> sims;
    for (const auto& n : neighbors) sims.push_back(n.similarity);
    auto weights = attention_weights(sims, params.tau);
    auto r = aggregate_move_vector(neighbors, weights, table);
    bool degenerate = false;
    auto fused = fuse(emb.row(i), r, params.alpha_fuse, &degenerate);
    if (degenerate) ++diag.degenerate;
    std::copy(fused.begin(), fused.end(), out.row(i).begin());
  }
  if (diagnostics) *diagnostics = diag;
  return out;
}

std::string serialize_memory_bank(const MemoryBank& bank, ContainerEncoding encoding) {
  MatrixContainer c;
  c.kind = "memory_bank";
  c.dim = bank.dim;
  c.rows = bank.entries.size();
  json moves = json::array();
  json sources = json::array();
  for (const auto& e : bank.entries) {
    moves.push_back(e.move);
    sources.push_back({e.session_id, e.index});
    c.values.insert(c.values.end(), e.embedding.begin(), e.embedding.end());
  }
  c.header = {{"moves", moves}, {"sources", sources}};
  return encode_container(c, encoding);
}

MemoryBank parse_memory_bank(std::string_view bytes) {
  auto c = decode_container(bytes);
  if (c.kind != "memory_bank") throw ParseError("expected a memory_bank container, got kind '" + c.kind + "'");
  const auto& moves = c.header.value("moves", json::array());
  const auto& sources = c.header.value("sources", json::array());
  if (moves.size() != c.rows || sources.size() != c.rows) throw ParseError("memory bank header does not match T");
  MemoryBank bank;
  bank.dim = c.dim;
  for (std::size_t r = 0; r < c.rows; ++r) {
    MemoryEntry e;
    e.move = moves[r].get<std::string>();
    e.session_id = sources[r].at(0).get<std::string>();
    e.index = sources[r].at(1).get<std::size_t>();
    e.embedding.assign(c.values.begin() + r * c.dim, c.values.begin() + (r + 1) * c.dim);
    if (std::abs(l2_norm(e.embedding) - 1.0) > kUnitNormTolerance) {
      throw ParseError("memory bank entry " + std::to_string(r) + " is not unit norm");
    }
    bank.entries.push_back(std::move(e));
  }
  return bank;
}

std::string serialize_move_table(const MoveEmbeddingTable& table, ContainerEncoding encoding) {
  MatrixContainer c;
  c.kind = "move_table";
  c.dim = table.dim;
  c.rows = table.moves.size();
  c.values = table.rows;
  c.header = {{"moves", table.moves}, {"mode", to_string(table.mode)}, {"seed", table.seed}};
  return encode_container(c, encoding);
}

MoveEmbeddingTable parse_move_table(std::string_view bytes) {
  auto c = decode_container(bytes);
  if (c.kind != "move_table") throw ParseError("expected a move_table container, got kind '" + c.kind + "'");
  MoveEmbeddingTable t;
  t.dim = c.dim;
  t.moves = c.header.value("moves", std::vector<std::string>{});
  if (t.moves.size() != c.rows) throw ParseError("move table header does not match T");
  t.mode = parse_move_table_mode(c.header.value("mode", std::string("centroid")));
  t.seed = c.header.value("seed", std::uint64_t{0});
  t.rows = std::move(c.values);
  return t;
}

}  // namespace dseg
