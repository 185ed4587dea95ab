// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "dseg/commands.hpp"
#include "dseg/errors.hpp"
#include "dseg/util.hpp"
#include "helpers.hpp"
#include "oracles/fusion_oracle.hpp"
#include "oracles/metrics_oracle.hpp"

using namespace dseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kIdentityTol = 1e-12;
constexpr double kFusionTol = 1e-12;
constexpr double kAttentionTol = 1e-12;
constexpr double kMetricBudgetSeconds = 10.0;
constexpr double kCoherenceBudgetSeconds = 5.0;
constexpr double kMinF1 = 0.95;
constexpr int kMinCoverage = 93;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool agree(const MetricValue& x, const std::optional<double>& y) {
  return x.defined() == y.has_value() && (!y || std::abs(*x.value - *y) <= kOracleTol);
}

// Sample mean and SD of segment counts, written out longhand.
std::pair<double, std::optional<double>> k_stats(const std::vector<std::size_t>& ks) {
  double mean = 0;
  for (auto k : ks) mean += static_cast<double>(k);
  mean /= static_cast<double>(ks.size());
  if (ks.size() < 2) return {mean, std::nullopt};
  double ss = 0;
  for (auto k : ks) ss += (static_cast<double>(k) - mean) * (static_cast<double>(k) - mean);
  return {mean, std::sqrt(ss / static_cast<double>(ks.size() - 1))};
}

Outcome metric_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  const std::string names = "ABC";
  std::vector<std::size_t> ks;
  std::size_t checks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    oracle::Case c;
    c.t = 1 + static_cast<int>(rng() % 8);
    c.none_category = rng() % 2 == 0;
    // C counts the reserved category when it is enabled; keep 2 <= C <= 3.
    c.moves = c.none_category ? 1 + static_cast<int>(rng() % 2) : 2 + static_cast<int>(rng() % 2);
    std::string h, a;
    for (int i = 0; i < c.t; ++i) {
      int x = static_cast<int>(rng() % (c.moves + 1)) - 1;
      int y = static_cast<int>(rng() % (c.moves + 1)) - 1;
      c.human.push_back(x);
      c.ai.push_back(y);
      h += x < 0 ? '-' : names[x];
      a += y < 0 ? '-' : names[y];
    }
    std::vector<int> positions(std::max(c.t - 1, 0));
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    positions.resize(std::min<std::size_t>(positions.size(), rng() % 4));
    std::sort(positions.begin(), positions.end());
    c.cuts = positions;

    std::vector<std::string> moves;
    for (int m = 0; m < c.moves; ++m) moves.push_back(std::string(1, names[m]));
    auto cb = testing::make_codebook(moves, c.none_category);
    auto bs = testing::cuts(std::vector<std::size_t>(c.cuts.begin(), c.cuts.end()), static_cast<std::size_t>(c.t));
    auto lh = testing::make_labels(h, "human");
    auto la = testing::make_labels(a, "ai");
    ks.push_back(bs.segment_count());
    for (auto [labels, raw] : {std::pair{&lh, &c.human}, std::pair{&la, &c.ai}}) {
      o.require(agree(weighted_entropy(bs, *labels, cb), oracle::weighted_entropy(c, *raw)), "entropy");
      o.require(agree(weighted_purity(bs, *labels, cb), oracle::weighted_purity(c, *raw)), "purity");
      o.require(agree(adjacent_js(bs, *labels, cb), oracle::adjacent_js(c, *raw, false)), "adjacent JS");
      o.require(agree(adjacent_js(bs, *labels, cb, true), oracle::adjacent_js(c, *raw, true)), "normalized adjacent JS");
      o.require(agree(boundary_change_rate(bs, *labels, cb), oracle::bcr(c, *raw)), "BCR");
      checks += 5;
    }
    o.require(agree(human_ai_js(bs, lh, la, cb), oracle::human_ai_js(c)), "human-AI JS");
    ++checks;
    if (trial % 50 == 49) {
      auto got = granularity_stats(ks);
      auto want = k_stats(ks);
      o.require(std::abs(got.mean - want.first) <= kOracleTol && got.sd.has_value() == want.second.has_value() &&
                    std::abs(*got.sd - *want.second) <= kOracleTol,
                "granularity");
      ks.clear();
      ++checks;
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < kMetricBudgetSeconds, "too slow");
  if (o.pass) o.detail = std::to_string(checks) + " comparisons in " + fmt("%.3f s", secs);
  return o;
}

Outcome analytic_identities() {
  Outcome o;
  for (std::size_t c = 2; c <= 12; ++c) {
    SegmentDistribution uniform{std::vector<double>(c, 1.0 / static_cast<double>(c))};
    SegmentDistribution point{std::vector<double>(c, 0.0)};
    point.probs[c - 1] = 1.0;
    SegmentDistribution other{std::vector<double>(c, 0.0)};
    other.probs[0] = 1.0;
    o.require(normalized_entropy(uniform, c) == 1.0, "entropy of uniform C=" + std::to_string(c));
    o.require(normalized_entropy(point, c) == 0.0, "entropy of point mass");
    o.require(purity(uniform) == 1.0 / static_cast<double>(c), "purity of uniform");
    o.require(std::abs(js_divergence(uniform, uniform)) <= kIdentityTol, "JS(p,p)");
    o.require(std::abs(js_divergence(point, other) - 1.0) <= kIdentityTol, "JS of disjoint points");
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    SegmentDistribution p{std::vector<double>(2 + i % 5)};
    double s = 0;
    for (auto& x : p.probs) s += (x = u(rng));
    for (auto& x : p.probs) x /= s;
    o.require(std::abs(js_divergence(p, p)) <= kIdentityTol, "JS(p,p) random");
  }
  if (o.pass) o.detail = "C = 2..12 plus 1000 random JS(p,p)";
  return o;
}

Corpus corpus_from(const SynthCorpus& s) {
  Corpus c;
  c.codebook = s.codebook;
  for (const auto& session : s.sessions) {
    c.sessions.push_back({session.dialogue, session.embeddings});
    c.labels[kSynthHumanRater][session.dialogue.session_id] = session.human;
    c.labels[kSynthAiRater][session.dialogue.session_id] = session.ai;
  }
  return c;
}

Outcome oracle_corpus() {
  Outcome o;
  SynthSpec spec;
  spec.sessions = 60;
  spec.seed = 11;
  auto synth = generate(spec);
  auto corpus = corpus_from(synth);
  std::vector<Segmentation> truth;
  for (const auto& s : synth.sessions) truth.push_back({s.dialogue.session_id, s.truth, "truth", ""});
  EvaluationConfig cfg;
  cfg.bootstrap_iterations = 1000;
  auto report = evaluate_corpus(corpus, truth, cfg, "truth");
  const std::map<std::string, double> want{{"entropy_human", 0.0}, {"entropy_ai", 0.0}, {"purity_human", 1.0},
                                           {"purity_ai", 1.0},     {"bcr_human", 1.0},  {"bcr_ai", 1.0},
                                           {"ha_js", 0.0}};
  for (const auto& [key, value] : want) {
    const auto& agg = report.aggregate(key);
    o.require(agg.mean.has_value() && *agg.mean == value && agg.n == spec.sessions, key + " not exact");
  }
  if (o.pass) o.detail = std::to_string(spec.sessions) + " sessions, all corpus means exact";
  return o;
}

Outcome coherence_recovery() {
  Outcome o;
  SynthSpec spec;
  spec.sessions = 100;
  spec.separation = 0.7;
  spec.seed = 5;
  auto synth = generate(spec);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t tp = 0, predicted = 0, planted = 0;
  for (const auto& s : synth.sessions) {
    DecodeParams p;  // window 2, alpha 0.5, min_gap 3
    p.pick_num = std::max<std::size_t>(*p.pick_num, s.truth.size());
    auto seg = segment_coherence(s.dialogue, s.embeddings, p);
    const auto& got = seg.boundaries.indices();
    const auto& want = s.truth.indices();
    for (auto b : got) tp += std::binary_search(want.begin(), want.end(), b);
    predicted += got.size();
    planted += want.size();
  }
  const double secs = seconds_since(t0);
  const double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  const double recall = planted ? static_cast<double>(tp) / static_cast<double>(planted) : 0.0;
  const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  o.require(f1 >= kMinF1, "F1 " + fmt("%.4f", f1));
  o.require(secs < kCoherenceBudgetSeconds, "too slow: " + fmt("%.3f s", secs));
  o.detail = "F1 " + fmt("%.4f", f1) + " (P " + fmt("%.4f", precision) + ", R " + fmt("%.4f", recall) + ") in " +
             fmt("%.4f s", secs);
  return o;
}

Outcome decoder_properties() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t t = 2 + rng() % 60;
    std::vector<double> depth(t - 1);
    const int shape = static_cast<int>(rng() % 3);
    for (auto& x : depth) x = shape == 0 ? u(rng) * 2 : shape == 1 ? std::floor(u(rng) * 4) / 2 : u(rng) * u(rng);
    DecodeParams p;
    p.window_size = 1 + rng() % 4;
    p.alpha = u(rng) * 3 - 1;
    p.min_gap = 1 + rng() % 5;
    if (rng() % 3 == 0) {
      p.avg_seg_len = 2 + rng() % 9;
    } else {
      p.pick_num = 1 + rng() % 8;
    }
    auto picked = select_boundaries(depth, p, t).indices();
    for (std::size_t i = 0; i < picked.size(); ++i) {
      for (std::size_t j = i + 1; j < picked.size(); ++j) o.require(picked[j] - picked[i] >= p.min_gap, "min_gap");
    }
    o.require(picked.size() <= *p.cap(t), "cap");
    DecodeParams stricter = p;
    stricter.alpha = p.alpha + u(rng) * 2;
    o.require(select_boundaries(depth, stricter, t).size() <= picked.size(), "alpha monotonicity");
    std::vector<double> flat(t - 1, u(rng));
    o.require(select_boundaries(flat, p, t).empty(), "constant profile");
  }
  if (o.pass) o.detail = "10000 profiles";
  return o;
}

Outcome fusion_correctness() {
  Outcome o;
  SynthSpec spec;
  spec.sessions = 20;
  spec.seed = 8;
  auto synth = generate(spec);
  auto corpus = corpus_from(synth);
  auto bank = build_memory(corpus, kSynthHumanRater);
  auto table = build_move_table(corpus.codebook, bank, MoveTableMode::kCentroid, 0);
  FusionParams zero;
  zero.alpha_fuse = 0.0;
  for (const auto& s : corpus.sessions) {
    auto fused = fused_embeddings(*s.embeddings, bank, table, zero);
    o.require(fused.values == s.embeddings->values, "alpha 0 changed embeddings");
    auto a = segment_coherence(s.dialogue, *s.embeddings, DecodeParams{});
    auto b = segment_coherence(s.dialogue, fused, DecodeParams{});
    o.require(serialize_segmentation(a) == serialize_segmentation(b), "alpha 0 changed a segmentation");
  }

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t compared = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = 1 + rng() % 4;
    const std::size_t n = 1 + rng() % 6;
    const std::size_t moves = 1 + rng() % 3;
    MemoryBank mb;
    mb.dim = d;
    std::vector<std::vector<double>> rows;
    std::vector<int> idx;
    for (std::size_t j = 0; j < n; ++j) {
      rows.push_back(testing::random_unit(rng, d));
      idx.push_back(static_cast<int>(rng() % moves));
      mb.entries.push_back({"q", j, "M" + std::to_string(idx.back()), rows.back()});
    }
    MoveEmbeddingTable mt;
    mt.dim = d;
    std::vector<std::vector<double>> trows;
    for (std::size_t m = 0; m < moves; ++m) {
      trows.push_back(testing::random_unit(rng, d));
      mt.moves.push_back("M" + std::to_string(m));
      mt.rows.insert(mt.rows.end(), trows.back().begin(), trows.back().end());
    }
    FusionParams p;
    p.k_ret = 1 + rng() % 3;
    p.tau = 0.05 + u(rng);
    p.alpha_fuse = u(rng) * 2;
    p.exclude_self = rng() % 2 == 0;
    // Queries are the bank's own session so self-exclusion applies.
    std::vector<std::vector<double>> qs;
    const std::size_t q = 1 + rng() % n;
    for (std::size_t i = 0; i < q; ++i) qs.push_back(rng() % 2 ? rows[i] : testing::random_unit(rng, d));
    if (p.exclude_self && n == 1) p.exclude_self = false;
    auto emb = testing::make_embeddings(qs, "q");
    auto fused = fused_embeddings(emb, mb, mt, p);
    for (std::size_t i = 0; i < q; ++i) {
      auto want = oracle::fuse_one(qs[i], rows, idx, trows, static_cast<int>(p.k_ret), p.tau, p.alpha_fuse,
                                   p.exclude_self ? static_cast<int>(i) : -1);
      for (std::size_t k = 0; k < d; ++k) o.require(std::abs(fused.row(i)[k] - want[k]) <= kFusionTol, "brute force");
      ++compared;
    }
  }

  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> sims(1 + rng() % 10);
    for (auto& s : sims) s = u(rng) * 2 - 1;
    const double tau = std::pow(10.0, u(rng) * 3 - 2.5);
    auto w = attention_weights(sims, tau);
    double sum = 0;
    for (double x : w) sum += x;
    o.require(std::abs(sum - 1.0) <= kAttentionTol, "attention sum");
  }
  if (o.pass) {
    o.detail = std::to_string(corpus.sessions.size()) + " sessions unchanged at alpha 0, " + std::to_string(compared) +
               " fused vectors vs brute force, 10000 attention sums";
  }
  return o;
}

bool valid_set(const BoundarySet& b, std::size_t t) {
  const auto& v = b.indices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] + 1 >= t) return false;
    if (i && v[i] <= v[i - 1]) return false;
  }
  return b.dialogue_length() == t;
}

Outcome parser_fuzz() {
  Outcome o;
  std::mt19937_64 rng(1234);
  const std::vector<std::string> pieces{"{", "}", "[", "]", ",", ":", "\"", "\\", "boundary_indices", "\"boundary_indices\"",
                                        "-", "1", "7", "12", "3.0", "1e2", "null", "true", "```json", "```", " ", "\n",
                                        "Sure! ", "\xff", "\xc3\xa9", "99999999999999999999"};
  std::size_t valid = 0, typed = 0;
  for (int i = 0; i < 100000; ++i) {
    std::string s;
    if (i % 2 == 0) {
      const std::size_t len = rng() % 64;
      for (std::size_t k = 0; k < len; ++k) s.push_back(static_cast<char>(rng() & 0xff));
    } else {
      const std::size_t len = rng() % 24;
      for (std::size_t k = 0; k < len; ++k) s += pieces[rng() % pieces.size()];
      if (rng() % 3 == 0) s = "{\"boundary_indices\":[" + s + "]}";
    }
    const std::size_t t = 1 + rng() % 20;
    try {
      auto b = parse_boundary_response(s, t, rng() % 4 == 0);
      o.require(valid_set(b, t), "invariant violated");
      ++valid;
    } catch (const LlmResponseError&) {
      ++typed;
    } catch (const std::exception& e) {
      o.require(false, std::string("untyped exception: ") + e.what());
    }
  }
  struct Fixture {
    std::string text;
    std::size_t t;
    std::vector<std::size_t> want;
  };
  const std::vector<Fixture> fixtures{
      {"{\"boundary_indices\":[3,7,12]}", 13, {3, 7}},
      {"```json\n{\"boundary_indices\":[2, 5, 9]}\n```", 10, {2, 5}},
      {"Here are the boundaries you asked for:\n{\"boundary_indices\":[1,4]}\nLet me know if you need more.", 5, {1}},
  };
  for (const auto& f : fixtures) {
    try {
      o.require(parse_boundary_response(f.text, f.t).indices() == f.want, "fixture mismatch");
    } catch (const std::exception& e) {
      o.require(false, std::string("fixture failed: ") + e.what());
    }
  }
  if (o.pass) o.detail = std::to_string(valid) + " parsed, " + std::to_string(typed) + " typed errors, 3 fixtures";
  return o;
}

Outcome mock_end_to_end() {
  Outcome o;
  testing::TempDir dir("acceptance_e2e");
  SynthSpec spec;
  spec.sessions = 10;
  spec.seed = 21;
  spec.rater_noise = 0.2;
  auto synth = generate(spec);
  auto manifest = write_synth_corpus(synth, dir.path() / "corpus");

  CannedResponses canned;
  for (const auto& s : synth.sessions) {
    json cuts = s.truth.indices();
    cuts.push_back(s.dialogue.size() - 1);
    std::vector<json> replies;
    if (s.dialogue.session_id == "s003") {
      replies.push_back("I think the topics change around turn 5.");
      replies.push_back(json{{"status", 500}, {"body", "overloaded"}});
    }
    replies.push_back("```json\n" + json{{"boundary_indices", cuts}}.dump() + "\n```");
    canned.rules.push_back({"[0] " + s.dialogue.utterances[0].text + "\n", replies});
  }
  MockChatServer server(std::move(canned));
  server.start();

  SegmentOptions seg;
  seg.manifest = manifest;
  seg.method = SegmentMethod::kLlmGeneric;
  seg.out_dir = dir.path() / "llm";
  seg.llm.endpoint = server.endpoint();
  seg.llm.max_retries = 2;
  seg.llm.timeout_seconds = 10;
  seg.jobs = 4;
  std::ostringstream out, err;
  const int seg_rc = cmd_segment(seg, out, err);
  o.require(seg_rc == kExitOk, "segment exit " + std::to_string(seg_rc) + ": " + err.str());
  o.require(server.request_count() == 12, "expected 12 requests, saw " + std::to_string(server.request_count()));
  server.stop();
  if (!o.pass) return o;

  auto retried = parse_segmentation(read_file(dir.path() / "llm" / "s003.json"), synth.sessions[3].dialogue.size());
  o.require(retried.method.find("attempts=3") != std::string::npos, "retry not recorded: " + retried.method);
  o.require(retried.boundaries == synth.sessions[3].truth, "retried session has the wrong boundaries");

  EvaluateOptions ev;
  ev.manifest = manifest;
  ev.inputs = {{"LLM-generic", seg.out_dir}};
  ev.out_dir = dir.path() / "eval";
  std::ostringstream eout, eerr;
  const int ev_rc = cmd_evaluate(ev, eout, eerr);
  o.require(ev_rc == kExitOk, "evaluate exit " + std::to_string(ev_rc) + ": " + eerr.str());
  if (!o.pass) return o;
  const auto md = read_file(ev.out_dir / "report.md");
  std::istringstream lines(md);
  std::string header, rule, row;
  std::getline(lines, header);
  std::getline(lines, rule);
  std::getline(lines, row);
  for (const char* col : {"Granularity", "Entropy", "Purity", "Adjacent JS", "BCR", "Human-AI JS"}) {
    o.require(header.find(col) != std::string::npos, std::string("missing column ") + col);
  }
  const std::string agg = R"( -?\d+\.\d{3} \[-?\d+\.\d{2}, -?\d+\.\d{2}\] \|)";
  const std::regex shape(R"(^\| LLM-generic \| \d+\.\d{2} \(\d+\.\d{2}\) \|)" + agg + agg + agg + agg + agg + "$");
  o.require(std::regex_match(row, shape), "row not in table shape: " + row);
  if (o.pass) o.detail = "10 sessions, 12 requests, row: " + row;
  return o;
}

Outcome bootstrap_checks() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.5, 0.1);
  std::vector<double> sample(100);
  for (auto& x : sample) x = normal(rng);
  auto a = bootstrap_ci(sample, 0.95, 10000, 42);
  auto b = bootstrap_ci(sample, 0.95, 10000, 42);
  o.require(a && b && *a == *b, "same seed gave different intervals");
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    for (auto& x : sample) x = normal(rng);
    auto ci = bootstrap_ci(sample, 0.95, 2000, static_cast<std::uint64_t>(rep));
    covered += ci && ci->lo <= 0.5 && 0.5 <= ci->hi;
  }
  o.require(covered >= kMinCoverage, "coverage " + std::to_string(covered) + "/100");
  o.detail = "deterministic; coverage " + std::to_string(covered) + "/100";
  return o;
}

Outcome round_trips() {
  Outcome o;
  testing::TempDir dir("acceptance_rt");
  SynthSpec spec;
  spec.sessions = 12;
  spec.seed = 2;
  spec.rater_noise = 0.3;
  spec.unlabeled_rate = 0.2;
  auto synth = generate(spec);
  std::size_t files = 0;
  for (auto enc : {ContainerEncoding::kBinary, ContainerEncoding::kJson}) {
    const auto root = dir.path() / (enc == ContainerEncoding::kBinary ? "bin" : "json");
    const auto manifest_path = write_synth_corpus(synth, root, enc);
    // Second write of a parsed first write must reproduce it exactly.
    auto twice = [&](const fs::path& path, const std::function<std::string(std::string_view)>& reparse) {
      const auto first = read_file(path);
      const auto second = reparse(first);
      const auto third = reparse(second);
      o.require(second == first && third == second, "round trip changed " + path.generic_string());
      ++files;
    };
    const auto manifest = load_manifest(manifest_path);
    twice(manifest_path, [&](std::string_view b) { return serialize_manifest(parse_manifest(b, root), root); });
    twice(manifest.codebook_path, [](std::string_view b) { return serialize_codebook(parse_codebook(b)); });
    const auto codebook = parse_codebook(read_file(manifest.codebook_path));
    std::vector<Dialogue> dialogues;
    for (const auto& s : manifest.sessions) {
      twice(s.transcript_path, [](std::string_view b) { return serialize_transcript(parse_transcript(b)); });
      dialogues.push_back(parse_transcript(read_file(s.transcript_path)));
      twice(*s.embedding_path, [enc](std::string_view b) { return serialize_embeddings(load_embeddings(b), enc); });
      const auto truth = root / "truth" / (dialogues.back().session_id + ".json");
      const auto t = dialogues.back().size();
      twice(truth, [t](std::string_view b) { return serialize_segmentation(parse_segmentation(b, t)); });
    }
    for (const auto& lf : manifest.label_files) {
      twice(lf.path, [&](std::string_view b) {
        return serialize_labels(lf.rater_id, parse_labels(b, lf.rater_id, codebook, dialogues), dialogues);
      });
    }
  }
  if (o.pass) o.detail = std::to_string(files) + " files byte-identical after write, read, write";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracle},
      {"analytic identities", analytic_identities},
      {"oracle corpus", oracle_corpus},
      {"coherence recovery", coherence_recovery},
      {"decoder properties", decoder_properties},
      {"fusion correctness", fusion_correctness},
      {"LLM parser fuzz", parser_fuzz},
      {"mock end-to-end", mock_end_to_end},
      {"bootstrap determinism and coverage", bootstrap_checks},
      {"ingestion round trip", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    std::printf("%s %zu %s: %s\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
