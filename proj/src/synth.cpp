#include "dseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "dseg/errors.hpp"
#include "dseg/ingest.hpp"
#include "dseg/util.hpp"

namespace dseg {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxCentroidTries = 100;
constexpr std::size_t kMaxSessionTries = 100;

std::string session_name(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%03zu", s);
  return buf;
}

std::vector<double> unit_gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    for (auto& x : v) x = normal(rng);
    n = l2_norm(v);
  } while (n == 0.0);
  for (auto& x : v) x /= n;
  return v;
}

// Rounded through float so that the on-disk binary form reloads to the same
// values up to the unit-norm tolerance.
void normalize_as_float(std::span<double> v) {
  double n = l2_norm(v);
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x / n));
}

// Every within-segment pair must be more similar than every pair straddling
// a true boundary.
bool separated(const EmbeddingSequence& emb, const std::vector<SegmentSpan>& segments) {
  double min_within = 2.0;
  double max_across = -2.0;
  for (const auto& seg : segments) {
    for (std::size_t i = seg.first; i <= seg.last; ++i) {
      for (std::size_t j = i + 1; j <= seg.last; ++j) min_within = std::min(min_within, dot(emb.row(i), emb.row(j)));
    }
  }
  for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
    for (std::size_t i = segments[k].first; i <= segments[k].last; ++i) {
      for (std::size_t j = segments[k + 1].first; j <= segments[k + 1].last; ++j) {
        max_across = std::max(max_across, dot(emb.row(i), emb.row(j)));
      }
    }
  }
  return min_within > max_across;
}

SynthSession generate_session(const SynthSpec& spec, const Codebook& codebook, std::size_t s, std::size_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(attempt)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto t = std::uniform_int_distribution<std::size_t>(spec.t_min, spec.t_max)(rng);
  const auto k_hi = std::min(spec.k_max, t / spec.min_segment_len);
  const auto k = std::uniform_int_distribution<std::size_t>(spec.k_min, k_hi)(rng);

  std::vector<std::size_t> lengths(k, spec.min_segment_len);
  std::uniform_int_distribution<std::size_t> pick_segment(0, k - 1);
  for (std::size_t extra = t - k * spec.min_segment_len; extra > 0; --extra) ++lengths[pick_segment(rng)];
  std::vector<SegmentSpan> segments;
  std::size_t pos = 0;
  for (auto len : lengths) {
    segments.push_back({pos, pos + len - 1});
    pos += len;
  }

  SynthSession out;
  out.truth = cut_points(segments);
  for (std::size_t i = 0; i < k; ++i) {
    if (i == 0) {
      out.dominant_moves.push_back(std::uniform_int_distribution<std::size_t>(0, spec.moves - 1)(rng));
    } else {
      auto m = std::uniform_int_distribution<std::size_t>(0, spec.moves - 2)(rng);
      if (m >= out.dominant_moves.back()) ++m;
      out.dominant_moves.push_back(m);
    }
  }

  const std::string sid = session_name(s);
  out.dialogue.session_id = sid;
  out.human.rater_id = kSynthHumanRater;
  out.ai.rater_id = kSynthAiRater;
  for (std::size_t seg = 0; seg < k; ++seg) {
    for (std::size_t i = segments[seg].first; i <= segments[seg].last; ++i) {
      out.dialogue.utterances.push_back({"u" + std::to_string(i), i, i % 2 == 0 ? "T" : "S",
                                         sid + " utterance " + std::to_string(i) + " of segment " +
                                             std::to_string(seg)});
      if (spec.unlabeled_rate > 0.0 && unit(rng) < spec.unlabeled_rate) continue;
      const auto move = out.dominant_moves[seg];
      out.human.labels[i] = codebook.moves[move].name;
      auto flipped = move;
      if (spec.moves > 1 && spec.rater_noise > 0.0 && unit(rng) < spec.rater_noise) {
        flipped = std::uniform_int_distribution<std::size_t>(0, spec.moves - 2)(rng);
        if (flipped >= move) ++flipped;
      }
      out.ai.labels[i] = codebook.moves[flipped].name;
    }
  }

  std::vector<std::vector<double>> centroids;
  for (std::size_t seg = 0; seg < k; ++seg) {
    std::size_t tries = 0;
    for (;;) {
      auto c = unit_gaussian(rng, spec.dim);
      if (seg == 0 || dot(c, centroids.back()) <= 1.0 - spec.separation) {
        centroids.push_back(std::move(c));
        break;
      }
      if (++tries >= kMaxCentroidTries) {
        throw ConfigError("could not draw centroids with separation " + std::to_string(spec.separation) + " in " +
                          std::to_string(kMaxCentroidTries) + " tries; lower separation or raise dim");
      }
    }
  }
  std::normal_distribution<double> noise(0.0, spec.spread / std::sqrt(static_cast<double>(spec.dim)));
  out.embeddings.session_id = sid;
  out.embeddings.dim = spec.dim;
  out.embeddings.values.resize(t * spec.dim);
  for (std::size_t seg = 0; seg < k; ++seg) {
    for (std::size_t i = segments[seg].first; i <= segments[seg].last; ++i) {
      auto row = out.embeddings.row(i);
      for (std::size_t d = 0; d < spec.dim; ++d) row[d] = centroids[seg][d] + noise(rng);
      normalize_as_float(row);
    }
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth spec: " + m); };
  if (sessions == 0) fail("sessions must be positive");
  if (t_min < 2 || t_min > t_max) fail("need 2 <= t_min <= t_max");
  if (k_min < 1 || k_min > k_max) fail("need 1 <= k_min <= k_max");
  if (k_max > t_min) fail("k_max must not exceed t_min");
  if (min_segment_len < 1) fail("min_segment_len must be positive");
  if (k_min * min_segment_len > t_min) fail("k_min segments of min_segment_len do not fit in t_min utterances");
  if (moves < 1) fail("at least one move is required");
  if (moves == 1 && k_max >= 2) fail("adjacent segments need distinct moves, which C=1 cannot provide for K>=2");
  if (dim < 2) fail("dim must be at least 2");
  for (auto [name, p] : {std::pair{"separation", separation}, {"rater_noise", rater_noise},
                         {"unlabeled_rate", unlabeled_rate}}) {
    if (!(p >= 0.0 && p <= 1.0)) fail(std::string(name) + " must lie in [0, 1]");
  }
  if (!(spread >= 0.0) || !std::isfinite(spread)) fail("spread must be finite and non-negative");
}

json SynthSpec::to_json() const {
  return {{"sessions", sessions},       {"t_min", t_min},
          {"t_max", t_max},             {"k_min", k_min},
          {"k_max", k_max},             {"moves", moves},
          {"dim", dim},                 {"separation", separation},
          {"rater_noise", rater_noise}, {"unlabeled_rate", unlabeled_rate},
          {"seed", seed},               {"min_segment_len", min_segment_len},
          {"spread", spread}};
}

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s;
  if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
  static const char* known[] = {"sessions", "t_min",          "t_max", "k_min",           "k_max",
                                "moves",    "dim",            "separation", "rater_noise", "unlabeled_rate",
                                "seed",     "min_segment_len", "spread"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known)) {
      throw ConfigError("synth spec: unknown field '" + key + "'");
    }
  }
  try {
    s.sessions = j.value("sessions", s.sessions);
    s.t_min = j.value("t_min", s.t_min);
    s.t_max = j.value("t_max", s.t_max);
    s.k_min = j.value("k_min", s.k_min);
    s.k_max = j.value("k_max", s.k_max);
    s.moves = j.value("moves", s.moves);
    s.dim = j.value("dim", s.dim);
    s.separation = j.value("separation", s.separation);
    s.rater_noise = j.value("rater_noise", s.rater_noise);
    s.unlabeled_rate = j.value("unlabeled_rate", s.unlabeled_rate);
    s.seed = j.value("seed", s.seed);
    s.min_segment_len = j.value("min_segment_len", s.min_segment_len);
    s.spread = j.value("spread", s.spread);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus corpus;
  corpus.spec = spec;
  corpus.codebook.name = "synthetic";
  for (std::size_t m = 0; m < spec.moves; ++m) {
    corpus.codebook.moves.push_back({"Move" + std::to_string(m), "Synthetic move " + std::to_string(m) + ".",
                                     {"example of move " + std::to_string(m)}});
  }
  corpus.codebook.validate();
  for (std::size_t s = 0; s < spec.sessions; ++s) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == kMaxSessionTries) {
        throw ConfigError("session " + session_name(s) + " failed the separation check " +
                          std::to_string(kMaxSessionTries) + " times; lower spread");
      }
      auto session = generate_session(spec, corpus.codebook, s, attempt);
      if (spec.separation >= 0.5 && !separated(session.embeddings, induce_segments(session.truth))) continue;
      corpus.sessions.push_back(std::move(session));
      break;
    }
  }
  return corpus;
}

std::filesystem::path write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir,
                                         ContainerEncoding encoding) {
  const std::string ext = encoding == ContainerEncoding::kBinary ? ".emb" : ".emb.json";
  CorpusManifest manifest;
  manifest.codebook_path = dir / "codebook.json";
  write_file_atomic(manifest.codebook_path, serialize_codebook(corpus.codebook));

  std::vector<Dialogue> dialogues;
  std::map<std::string, RaterLabels> human;
  std::map<std::string, RaterLabels> ai;
  for (const auto& s : corpus.sessions) {
    const auto& sid = s.dialogue.session_id;
    ManifestSession ms{sid, dir / "transcripts" / (sid + ".jsonl"), dir / "embeddings" / (sid + ext)};
    write_file_atomic(ms.transcript_path, serialize_transcript(s.dialogue));
    write_file_atomic(*ms.embedding_path, serialize_embeddings(s.embeddings, encoding));
    Segmentation truth{sid, s.truth, "truth", hex_digest(corpus.spec.to_json().dump())};
    write_file_atomic(dir / "truth" / (sid + ".json"), serialize_segmentation(truth));
    manifest.sessions.push_back(std::move(ms));
    dialogues.push_back(s.dialogue);
    human[sid] = s.human;
    ai[sid] = s.ai;
  }
  ManifestLabelFile hf{kSynthHumanRater, dir / "labels" / "human.jsonl"};
  ManifestLabelFile af{kSynthAiRater, dir / "labels" / "ai.jsonl"};
  write_file_atomic(hf.path, serialize_labels(kSynthHumanRater, human, dialogues));
  write_file_atomic(af.path, serialize_labels(kSynthAiRater, ai, dialogues));
  manifest.label_files = {hf, af};
  write_file_atomic(dir / "synth_spec.json", corpus.spec.to_json().dump(2) + "\n");
  const auto path = dir / "manifest.json";
  write_file_atomic(path, serialize_manifest(manifest, dir));
  return path;
}

}  // namespace dseg
