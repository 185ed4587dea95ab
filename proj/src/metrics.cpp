#include "dseg/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "dseg/errors.hpp"
#include "dseg/ingest.hpp"
#include "dseg/util.hpp"

namespace dseg {

namespace {

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

// Per-segment distributions; nullopt where undefined.
std::vector<std::optional<SegmentDistribution>> distributions(std::span<const SegmentSpan> segments,
                                                              const std::vector<std::optional<std::size_t>>& cats,
                                                              std::size_t categories) {
  std::vector<std::optional<SegmentDistribution>> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) {
    std::vector<std::size_t> counts(categories, 0);
    std::size_t total = 0;
    for (std::size_t i = seg.first; i <= seg.last; ++i) {
      if (!cats[i]) continue;
      ++counts[*cats[i]];
      ++total;
    }
    if (total == 0) {
      out.emplace_back(std::nullopt);
      continue;
    }
    SegmentDistribution d;
    d.probs.resize(categories);
    for (std::size_t c = 0; c < categories; ++c) {
      d.probs[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
    }
    out.emplace_back(std::move(d));
  }
  return out;
}

template <typename PerSegment>
MetricValue length_weighted(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook,
                            PerSegment&& per_segment) {
  auto segments = induce_segments(boundaries);
  auto cats = resolve_categories(labels, codebook, boundaries.dialogue_length());
  auto dists = distributions(segments, cats, codebook.category_count());
  auto weights = segment_weights(segments, boundaries.dialogue_length());
  MetricValue out;
  double num = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (!dists[k]) {
      ++out.dropped_segments;
      continue;
    }
    num += weights.w[k] * per_segment(*dists[k]);
    mass += weights.w[k];
  }
  if (mass > 0.0) out.value = clamp_unit(num / mass);
  return out;
}

}  // namespace

std::vector<std::optional<std::size_t>> resolve_categories(const RaterLabels& labels, const Codebook& codebook,
                                                           std::size_t length) {
  std::vector<std::optional<std::size_t>> cats(length);
  if (codebook.none_category_enabled) {
    for (auto& c : cats) c = codebook.moves.size();
  }
  for (const auto& [index, move] : labels.labels) {
    if (index >= length) {
      throw ValidationError("label at utterance " + std::to_string(index) + " beyond dialogue length " +
                            std::to_string(length));
    }
    auto c = codebook.index_of(move);
    if (!c) throw ValidationError("label '" + move + "' is not a move of codebook '" + codebook.name + "'");
    cats[index] = *c;
  }
  return cats;
}

SegmentDistribution segment_distribution(const SegmentSpan& segment, const RaterLabels& labels,
                                         const Codebook& codebook) {
  if (segment.last < segment.first) throw ValidationError("empty segment");
  auto cats = resolve_categories(labels, codebook, segment.last + 1);
  std::array<SegmentSpan, 1> one{segment};
  auto d = distributions(one, cats, codebook.category_count());
  if (!d[0]) {
    throw UndefinedDistribution("segment [" + std::to_string(segment.first) + ".." +
                                std::to_string(segment.last) + "] has no labeled utterance");
  }
  return std::move(*d[0]);
}

SegmentWeights segment_weights(std::span<const SegmentSpan> segments, std::size_t length) {
  SegmentWeights sw;
  const double t = static_cast<double>(length);
  for (std::size_t k = 0; k < segments.size(); ++k) {
    sw.w.push_back(static_cast<double>(segments[k].length()) / t);
    if (k + 1 < segments.size()) {
      sw.w_adj.push_back(static_cast<double>(segments[k].length() + segments[k + 1].length()) / (2.0 * t));
    }
  }
  return sw;
}

double normalized_entropy(const SegmentDistribution& dist, std::size_t categories) {
  if (categories < 2) throw DomainError("normalized entropy needs at least 2 categories");
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return clamp_unit(h / std::log2(static_cast<double>(categories)));
}

double purity(const SegmentDistribution& dist) {
  return dist.probs.empty() ? 0.0 : *std::max_element(dist.probs.begin(), dist.probs.end());
}

double js_divergence(const SegmentDistribution& p, const SegmentDistribution& q) {
  if (p.probs.size() != q.probs.size()) {
    throw ValidationError("JS divergence over mismatched category counts " + std::to_string(p.probs.size()) +
                          " and " + std::to_string(q.probs.size()));
  }
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    double m = 0.5 * (p.probs[i] + q.probs[i]);
    if (p.probs[i] > 0.0) kl_p += p.probs[i] * std::log2(p.probs[i] / m);
    if (q.probs[i] > 0.0) kl_q += q.probs[i] * std::log2(q.probs[i] / m);
  }
  return clamp_unit(0.5 * kl_p + 0.5 * kl_q);
}

MetricValue weighted_entropy(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook) {
  const auto c = codebook.category_count();
  if (c < 2) throw DomainError("normalized entropy needs at least 2 categories");
  return length_weighted(boundaries, labels, codebook,
                         [c](const SegmentDistribution& d) { return normalized_entropy(d, c); });
}

MetricValue weighted_purity(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook) {
  return length_weighted(boundaries, labels, codebook, [](const SegmentDistribution& d) { return purity(d); });
}

MetricValue adjacent_js(const BoundarySet& boundaries, const RaterLabels& labels, const Codebook& codebook,
                        bool normalized) {
  auto segments = induce_segments(boundaries);
  auto cats = resolve_categories(labels, codebook, boundaries.dialogue_length());
  auto dists = distributions(segments, cats, codebook.category_count());
  auto weights = segment_weights(segments, boundaries.dialogue_length());
  MetricValue out;
  for (const auto& d : dists) out.dropped_segments += d ? 0 : 1;
  if (segments.size() < 2) return out;
  double sum = 0.0;
  double mass = 0.0;
  bool any = false;
  for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
    if (!dists[k] || !dists[k + 1]) continue;
    sum += weights.w_adj[k] * js_divergence(*dists[k], *dists[k + 1]);
    mass += weights.w_adj[k];
    any = true;
  }
  if (!any) return out;
  out.value = normalized ? sum / mass : sum;
  return out;
}

MetricValue boundary_change_rate(const BoundarySet& boundaries, const RaterLabels& labels,
                                 const Codebook& codebook) {
  MetricValue out;
  if (boundaries.empty()) return out;
  auto cats = resolve_categories(labels, codebook, boundaries.dialogue_length());
  std::size_t changes = 0;
  std::size_t counted = 0;
  for (std::size_t b : boundaries.indices()) {
    if (!cats[b] || !cats[b + 1]) continue;
    ++counted;
    if (*cats[b] != *cats[b + 1]) ++changes;
  }
  if (counted > 0) out.value = static_cast<double>(changes) / static_cast<double>(counted);
  return out;
}

MetricValue human_ai_js(const BoundarySet& boundaries, const RaterLabels& human, const RaterLabels& ai,
                        const Codebook& codebook) {
  auto segments = induce_segments(boundaries);
  const auto length = boundaries.dialogue_length();
  const auto c = codebook.category_count();
  auto dh = distributions(segments, resolve_categories(human, codebook, length), c);
  auto da = distributions(segments, resolve_categories(ai, codebook, length), c);
  auto weights = segment_weights(segments, length);
  MetricValue out;
  double num = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (!dh[k] || !da[k]) {
      ++out.dropped_segments;
      continue;
    }
    num += weights.w[k] * js_divergence(*dh[k], *da[k]);
    mass += weights.w[k];
  }
  if (mass > 0.0) out.value = clamp_unit(num / mass);
  return out;
}

GranularityStats granularity_stats(std::span<const std::size_t> segment_counts) {
  if (segment_counts.empty()) throw DomainError("granularity needs at least one segmentation");
  GranularityStats g;
  const double n = static_cast<double>(segment_counts.size());
  double sum = 0.0;
  for (auto k : segment_counts) sum += static_cast<double>(k);
  g.mean = sum / n;
  if (segment_counts.size() >= 2) {
    double ss = 0.0;
    for (auto k : segment_counts) ss += (static_cast<double>(k) - g.mean) * (static_cast<double>(k) - g.mean);
    g.sd = std::sqrt(ss / (n - 1.0));
  }
  return g;
}

std::optional<ConfidenceInterval> bootstrap_ci(std::span<const double> values, double level,
                                               std::size_t iterations, std::uint64_t seed) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  if (iterations < 1000) throw DomainError("bootstrap needs at least 1000 iterations");
  if (values.size() < 2) return std::nullopt;
  const std::size_t n = values.size();
  std::vector<double> means(iterations);
  for (std::size_t b = 0; b < iterations; ++b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(static_cast<std::uint64_t>(b) >> 32)};
    std::mt19937_64 gen(seq);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += values[pick(gen)];
    means[b] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  // Linear interpolation between order statistics.
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(iterations - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, iterations - 1);
    double frac = pos - static_cast<double>(lo);
    return means[lo] + frac * (means[hi] - means[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return ConfidenceInterval{quantile(tail), quantile(1.0 - tail)};
}

const char* to_string(UnlabeledMode mode) {
  return mode == UnlabeledMode::kNoneCategory ? "none-category" : "exclude-unlabeled";
}

UnlabeledMode parse_unlabeled_mode(const std::string& text) {
  if (text == "none-category" || text == "none") return UnlabeledMode::kNoneCategory;
  if (text == "exclude-unlabeled" || text == "exclude") return UnlabeledMode::kExclude;
  throw ConfigError("unknown unlabeled mode '" + text + "' (expected none-category or exclude-unlabeled)");
}

MetricsReport evaluate_corpus(const Corpus& corpus, std::span<const Segmentation> segmentations,
                              const EvaluationConfig& config, const std::string& method) {
  if (segmentations.empty()) throw ValidationError("no segmentations to evaluate");
  for (const auto* rater : {&config.human_rater, &config.ai_rater}) {
    if (!corpus.has_rater(*rater)) throw ConfigError("rater '" + *rater + "' has no label file in the corpus");
  }
  std::set<std::string> seen;
  for (const auto& s : segmentations) {
    const auto* session = corpus.find(s.session_id);
    if (!session) throw ValidationError("segmentation for unknown session '" + s.session_id + "'");
    if (session->dialogue.size() != s.boundaries.dialogue_length()) {
      throw ValidationError("segmentation of session '" + s.session_id + "' assumes " +
                            std::to_string(s.boundaries.dialogue_length()) + " utterances, transcript has " +
                            std::to_string(session->dialogue.size()));
    }
    if (!seen.insert(s.session_id).second) {
      throw ValidationError("session '" + s.session_id + "' segmented more than once");
    }
  }

  Codebook codebook = corpus.codebook;
  codebook.none_category_enabled = config.unlabeled == UnlabeledMode::kNoneCategory;

  MetricsReport report;
  report.method = method.empty() ? segmentations.front().method : method;
  report.config = config;
  report.sessions.resize(segmentations.size());

  parallel_for(segmentations.size(), config.jobs, [&](std::size_t i) {
    const auto& seg = segmentations[i];
    const auto& b = seg.boundaries;
    auto h = corpus.labels_for(config.human_rater, seg.session_id);
    auto a = corpus.labels_for(config.ai_rater, seg.session_id);
    auto rater = [&](const RaterLabels& l) {
      RaterMetrics m;
      m.entropy = weighted_entropy(b, l, codebook);
      m.purity = weighted_purity(b, l, codebook);
      m.adjacent_js = adjacent_js(b, l, codebook, config.normalized_adjacent_js);
      m.bcr = boundary_change_rate(b, l, codebook);
      return m;
    };
    SessionMetrics& row = report.sessions[i];
    row.session_id = seg.session_id;
    row.utterances = b.dialogue_length();
    row.segments = b.segment_count();
    row.human = rater(h);
    row.ai = rater(a);
    row.ha_js = human_ai_js(b, h, a, codebook);
  });

  std::vector<std::size_t> ks;
  for (const auto& r : report.sessions) ks.push_back(r.segments);
  report.granularity = granularity_stats(ks);

  auto pick = [](const SessionMetrics& r, const std::string& key) -> const MetricValue& {
    if (key == "entropy_human") return r.human.entropy;
    if (key == "entropy_ai") return r.ai.entropy;
    if (key == "purity_human") return r.human.purity;
    if (key == "purity_ai") return r.ai.purity;
    if (key == "adjacent_js_human") return r.human.adjacent_js;
    if (key == "adjacent_js_ai") return r.ai.adjacent_js;
    if (key == "bcr_human") return r.human.bcr;
    if (key == "bcr_ai") return r.ai.bcr;
    return r.ha_js;
  };
  for (const char* key : kAggregateKeys) {
    std::vector<double> values;
    for (const auto& r : report.sessions) {
      const auto& v = pick(r, key);
      if (v.value) values.push_back(*v.value);
    }
    Aggregate agg;
    agg.n = values.size();
    if (!values.empty()) {
      agg.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      agg.ci = bootstrap_ci(values, config.ci_level, config.bootstrap_iterations, config.seed);
    }
    report.aggregates[key] = agg;
  }
  return report;
}

}  // namespace dseg
