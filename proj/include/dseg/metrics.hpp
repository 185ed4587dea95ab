#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dseg/core.hpp"

namespace dseg {

struct Corpus;

// Label distribution of one segment over C categories (moves in codebook
// order, then the reserved "none" category when enabled).
struct SegmentDistribution {
  std::vector<double> probs;
};

struct SegmentWeights {
  std::vector<double> w;      // |S_k| / T
  std::vector<double> w_adj;  // (|S_k| + |S_{k+1}|) / 2T
};

// A metric that may be undefined (no usable segments, K = 1, n = 1, ...).
struct MetricValue {
  std::optional<double> value;
  std::size_t dropped_segments = 0;

  bool defined() const { return value.has_value(); }
};

// Category of each utterance, or nullopt when it is unlabeled and the
// reserved category is disabled.
std::vector<std::optional<std::size_t>> resolve_categories(const RaterLabels& labels, const Codebook& codebook,
                                                           std::size_t length);

// Throws UndefinedDistribution when no utterance in the segment has a category.
SegmentDistribution segment_distribution(const SegmentSpan& segment, const RaterLabels& labels,
                                         const Codebook& codebook);

SegmentWeights segment_weights(std::span<const SegmentSpan> segments, std::size_t length);

// Entropy in bits divided by log2(C); throws DomainError for C < 2.
double normalized_entropy(const SegmentDistribution& dist, std::size_t categories);
double purity(const SegmentDistribution& dist);
// Base-2 Jensen-Shannon divergence, in [0, 1]. Throws ValidationError when
// the category counts differ.
double js_divergence(const SegmentDistribution& p, const SegmentDistribution& q);

// Length-weighted means over segments. Segments with undefined distributions
// are dropped and the remaining weights renormalized.
MetricValue weighted_entropy(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook);
MetricValue weighted_purity(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook);

// Sum over adjacent pairs of w_adj * JS. The pair weights are used as is
// unless `normalized` is set, in which case they are rescaled to sum to one.
MetricValue adjacent_js(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook,
                        bool normalized = false);

// Fraction of boundaries whose two flanking utterances differ in category.
// With the reserved category disabled, boundaries touching an unlabeled
// utterance are left out of both numerator and denominator.
MetricValue boundary_change_rate(const BoundarySet& boundaries, const RaterLabels& labels,
                                 const Codebook& codebook);

MetricValue human_ai_js(const BoundarySet& boundaries, const RaterLabels& human, const RaterLabels& ai,
                        const Codebook& codebook);

struct GranularityStats {
  double mean = 0.0;
  std::optional<double> sd;  // sample SD; undefined for a single value
};

GranularityStats granularity_stats(std::span<const std::size_t> segment_counts);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const ConfidenceInterval&) const = default;
};

// Percentile bootstrap of the mean. Resample b is drawn from a generator
// seeded by (seed, b) alone, so the result does not depend on scheduling.
// Returns nullopt for fewer than two values.
std::optional<ConfidenceInterval> bootstrap_ci(std::span<const double> values, double level = 0.95,
                                               std::size_t iterations = 10000, std::uint64_t seed = 0);

enum class UnlabeledMode { kNoneCategory, kExclude };

const char* to_string(UnlabeledMode mode);
UnlabeledMode parse_unlabeled_mode(const std::string& text);

struct EvaluationConfig {
  std::string human_rater = "human";
  std::string ai_rater = "ai";
  UnlabeledMode unlabeled = UnlabeledMode::kNoneCategory;
  bool normalized_adjacent_js = false;
  double ci_level = 0.95;
  std::size_t bootstrap_iterations = 10000;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct RaterMetrics {
  MetricValue entropy;
  MetricValue purity;
  MetricValue adjacent_js;
  MetricValue bcr;
};

struct SessionMetrics {
  std::string session_id;
  std::size_t utterances = 0;
  std::size_t segments = 0;
  RaterMetrics human;
  RaterMetrics ai;
  MetricValue ha_js;
};

struct Aggregate {
  std::optional<double> mean;
  std::optional<ConfidenceInterval> ci;
  std::size_t n = 0;  // sessions where the metric is defined
};

// Corpus aggregate keys, in report order.
inline constexpr const char* kAggregateKeys[] = {
    "entropy_human", "entropy_ai", "purity_human", "purity_ai", "adjacent_js_human",
    "adjacent_js_ai", "bcr_human",  "bcr_ai",    "ha_js"};

struct MetricsReport {
  std::string method;
  EvaluationConfig config;
  std::vector<SessionMetrics> sessions;
  GranularityStats granularity;
  std::map<std::string, Aggregate> aggregates;

  const Aggregate& aggregate(const std::string& key) const { return aggregates.at(key); }
};

// Throws before any computation when a segmentation names an unknown
// session, disagrees with its length, repeats a session, or a rater is missing.
MetricsReport evaluate_corpus(const Corpus& corpus, std::span<const Segmentation> segmentations,
                              const EvaluationConfig& config, const std::string& method = {});

}  // namespace dseg
