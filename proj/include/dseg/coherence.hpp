#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dseg/core.hpp"
#include "dseg/embedding.hpp"
#include "json.hpp"

namespace dseg {

// Boundary selection knobs. Defaults are the published baseline settings.
struct DecodeParams {
  std::size_t window_size = 2;
  double alpha = 0.5;  // threshold = mean + alpha * sd of the depth profile
  std::optional<std::size_t> pick_num = 4;
  std::optional<std::size_t> avg_seg_len;  // overrides pick_num when set
  std::size_t min_gap = 3;
  std::size_t smoothing_window = 0;  // half-width of a moving average over similarities; 0 = off

  void validate() const;
  nlohmann::json to_json() const;
  static DecodeParams from_json(const nlohmann::json& j);
  std::string fingerprint() const;
  // Largest number of boundaries allowed for a dialogue of `length`, or
  // nullopt when neither cap is configured.
  std::optional<std::size_t> cap(std::size_t length) const;
};

// Cosine of each adjacent pair; throws ValidationError for fewer than 2 vectors.
std::vector<double> adjacent_similarity(const EmbeddingSequence& emb);

// Centered moving average with the given half-width, truncated at the ends.
std::vector<double> smooth_profile(std::span<const double> values, std::size_t half_width);

// depth_i = (max of sims[i-w..i] - sims[i]) + (max of sims[i..i+w] - sims[i]),
// windows clamped at the ends.
std::vector<double> depth_scores(std::span<const double> sims, std::size_t window_size);

// Greedy selection: candidates with depth strictly above mean + alpha * sd,
// visited deepest first (lower index on ties), kept when at least min_gap
// away from every kept boundary, up to the cap. Returned ascending.
BoundarySet select_boundaries(std::span<const double> depths, const DecodeParams& params, std::size_t length);

Segmentation segment_coherence(const Dialogue& dialogue, const EmbeddingSequence& emb, const DecodeParams& params,
                               const std::string& method = "coherence");

}  // namespace dseg
