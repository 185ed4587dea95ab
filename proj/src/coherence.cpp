#include "dseg/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dseg/errors.hpp"
#include "dseg/util.hpp"

namespace dseg {

void DecodeParams::validate() const {
  if (window_size < 1) throw ConfigError("window_size must be at least 1");
  if (pick_num && *pick_num < 1) throw ConfigError("pick_num must be at least 1");
  if (avg_seg_len && *avg_seg_len < 2) throw ConfigError("avg_seg_len must be at least 2");
  if (min_gap < 1) throw ConfigError("min_gap must be at least 1");
  if (!std::isfinite(alpha)) throw ConfigError("alpha must be finite");
}

nlohmann::json DecodeParams::to_json() const {
  return {{"window_size", window_size},
          {"alpha", alpha},
          {"pick_num", pick_num ? nlohmann::json(*pick_num) : nlohmann::json(nullptr)},
          {"avg_seg_len", avg_seg_len ? nlohmann::json(*avg_seg_len) : nlohmann::json(nullptr)},
          {"min_gap", min_gap},
          {"smoothing_window", smoothing_window}};
}

DecodeParams DecodeParams::from_json(const nlohmann::json& j) {
  DecodeParams p;
  if (!j.is_object()) return p;
  p.window_size = j.value("window_size", p.window_size);
  p.alpha = j.value("alpha", p.alpha);
  if (j.contains("pick_num")) p.pick_num = j["pick_num"].is_null() ? std::nullopt : std::optional(j["pick_num"].get<std::size_t>());
  if (j.contains("avg_seg_len")) {
    p.avg_seg_len = j["avg_seg_len"].is_null() ? std::nullopt : std::optional(j["avg_seg_len"].get<std::size_t>());
  }
  p.min_gap = j.value("min_gap", p.min_gap);
  p.smoothing_window = j.value("smoothing_window", p.smoothing_window);
  p.validate();
  return p;
}

std::string DecodeParams::fingerprint() const { return hex_digest(to_json().dump()); }

std::optional<std::size_t> DecodeParams::cap(std::size_t length) const {
  if (avg_seg_len) {
    std::size_t est = (length + *avg_seg_len - 1) / *avg_seg_len;
    return est > 0 ? est - 1 : 0;
  }
  return pick_num;
}

std::vector<double> adjacent_similarity(const EmbeddingSequence& emb) {
  if (emb.size() < 2) throw ValidationError("need at least 2 utterances to place a boundary");
  std::vector<double> sims(emb.size() - 1);
  for (std::size_t i = 0; i + 1 < emb.size(); ++i) {
    sims[i] = std::clamp(dot(emb.row(i), emb.row(i + 1)), -1.0, 1.0);
  }
  return sims;
}

std::vector<double> smooth_profile(std::span<const double> values, std::size_t half_width) {
  std::vector<double> out(values.begin(), values.end());
  if (half_width == 0) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t lo = i >= half_width ? i - half_width : 0;
    std::size_t hi = std::min(values.size() - 1, i + half_width);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += values[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::vector<double> depth_scores(std::span<const double> sims, std::size_t window_size) {
  std::vector<double> depths(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) {
    std::size_t lo = i >= window_size ? i - window_size : 0;
    std::size_t hi = std::min(sims.size() - 1, i + window_size);
    double left = *std::max_element(sims.begin() + lo, sims.begin() + i + 1);
    double right = *std::max_element(sims.begin() + i, sims.begin() + hi + 1);
    depths[i] = (left - sims[i]) + (right - sims[i]);
  }
  return depths;
}

BoundarySet select_boundaries(std::span<const double> depths, const DecodeParams& params, std::size_t length) {
  params.validate();
  if (length < 1 || depths.size() + 1 != length) {
    throw ValidationError("depth profile of size " + std::to_string(depths.size()) +
                          " does not match dialogue length " + std::to_string(length));
  }
  if (depths.empty()) return BoundarySet::create({}, length);

  const auto [min_it, max_it] = std::minmax_element(depths.begin(), depths.end());
  const double n = static_cast<double>(depths.size());
  // The mean is clamped into [min, max] so a flat profile has sd exactly 0.
  const double mean = std::clamp(std::accumulate(depths.begin(), depths.end(), 0.0) / n, *min_it, *max_it);
  double ss = 0.0;
  for (double d : depths) ss += (d - mean) * (d - mean);
  const double threshold = mean + params.alpha * std::sqrt(ss / n);

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (depths[i] > threshold) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return depths[a] > depths[b]; });

  const auto cap = params.cap(length);
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    if (cap && kept.size() >= *cap) break;
    bool spaced = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (c > k ? c - k : k - c) >= params.min_gap;
    });
    if (spaced) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return BoundarySet::create(std::move(kept), length);
}

Segmentation segment_coherence(const Dialogue& dialogue, const EmbeddingSequence& emb, const DecodeParams& params,
                               const std::string& method) {
  if (emb.size() != dialogue.size()) {
    throw ValidationError("session '" + dialogue.session_id + "' has " + std::to_string(dialogue.size()) +
                          " utterances but " + std::to_string(emb.size()) + " embeddings");
  }
  auto sims = smooth_profile(adjacent_similarity(emb), params.smoothing_window);
  auto depths = depth_scores(sims, params.window_size);
  Segmentation s;
  s.session_id = dialogue.session_id;
  s.boundaries = select_boundaries(depths, params, dialogue.size());
  s.method = method;
  s.params_fingerprint = params.fingerprint();
  return s;
}

}  // namespace dseg
