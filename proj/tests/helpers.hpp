#pragma once

#include <filesystem>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dseg/core.hpp"
#include "dseg/embedding.hpp"

namespace testing {

inline dseg::Dialogue make_dialogue(std::size_t t, const std::string& session = "s") {
  dseg::Dialogue d;
  d.session_id = session;
  for (std::size_t i = 0; i < t; ++i) {
    d.utterances.push_back({"u" + std::to_string(i), i, i % 2 ? "S" : "T", "turn " + std::to_string(i)});
  }
  return d;
}

inline dseg::Codebook make_codebook(const std::vector<std::string>& moves, bool none = true) {
  dseg::Codebook cb;
  cb.name = "test";
  for (const auto& m : moves) cb.moves.push_back({m, m + " definition", {}});
  cb.none_category_enabled = none;
  return cb;
}

// "AAB-" style: one letter per utterance, '-' for unlabeled.
inline dseg::RaterLabels make_labels(const std::string& pattern, const std::string& rater = "human") {
  dseg::RaterLabels r;
  r.rater_id = rater;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] != '-') r.labels[i] = std::string(1, pattern[i]);
  }
  return r;
}

inline dseg::BoundarySet cuts(std::vector<std::size_t> b, std::size_t t) {
  return dseg::BoundarySet::create(std::move(b), t);
}

inline dseg::EmbeddingSequence make_embeddings(const std::vector<std::vector<double>>& rows,
                                               const std::string& session = "s") {
  dseg::EmbeddingSequence e;
  e.session_id = session;
  e.dim = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) e.values.insert(e.values.end(), r.begin(), r.end());
  return e;
}

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(d);
  double s = 0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("dseg_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
