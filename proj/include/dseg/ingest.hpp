#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dseg/core.hpp"
#include "dseg/embedding.hpp"

namespace dseg {

// Transcript: JSON lines {"id","speaker","text"}; an optional leading header
// line {"format_version":1,"session_id":...}. Indices follow file order.
Dialogue parse_transcript(std::string_view bytes, const std::string& session_id = {});
std::string serialize_transcript(const Dialogue& dialogue);

Codebook parse_codebook(std::string_view bytes);
std::string serialize_codebook(const Codebook& codebook);

// Labels: JSON lines {"session_id","utterance_id","move"} (move may be null),
// optional header {"format_version":1,"rater_id":...}. Utterance ids are
// resolved against `dialogues`. Returns one RaterLabels per labeled session.
std::map<std::string, RaterLabels> parse_labels(std::string_view bytes, const std::string& rater_id,
                                                const Codebook& codebook,
                                                std::span<const Dialogue> dialogues);
// Sessions in `dialogues` order, utterances in index order.
std::string serialize_labels(const std::string& rater_id, const std::map<std::string, RaterLabels>& labels,
                             std::span<const Dialogue> dialogues);

// Segmentation file: {"format_version","session_id","method",
// "params_fingerprint","boundary_indices"} with internal, sentinel-free cuts.
std::string serialize_segmentation(const Segmentation& segmentation);
// `length` is the session's utterance count; out-of-range cuts are rejected.
Segmentation parse_segmentation(std::string_view bytes, std::size_t length);

struct ManifestSession {
  std::string session_id;
  std::filesystem::path transcript_path;
  std::optional<std::filesystem::path> embedding_path;
};

struct ManifestLabelFile {
  std::string rater_id;
  std::filesystem::path path;
};

struct CorpusManifest {
  std::vector<ManifestSession> sessions;
  std::vector<ManifestLabelFile> label_files;
  std::filesystem::path codebook_path;
};

// Relative paths are resolved against `base_dir`.
CorpusManifest parse_manifest(std::string_view bytes, const std::filesystem::path& base_dir = {});
CorpusManifest load_manifest(const std::filesystem::path& path);
// Paths are written relative to `base_dir` when they live under it.
std::string serialize_manifest(const CorpusManifest& manifest, const std::filesystem::path& base_dir = {});

struct SessionData {
  Dialogue dialogue;
  std::optional<EmbeddingSequence> embeddings;
};

struct Corpus {
  Codebook codebook;
  std::vector<SessionData> sessions;
  // rater id -> session id -> labels
  std::map<std::string, std::map<std::string, RaterLabels>> labels;

  const SessionData* find(const std::string& session_id) const;
  bool has_rater(const std::string& rater_id) const { return labels.count(rater_id) > 0; }
  // Empty labels when the rater never labeled this session.
  RaterLabels labels_for(const std::string& rater_id, const std::string& session_id) const;
  std::vector<Dialogue> dialogues() const;
};

// Loads everything; throws the first error encountered.
Corpus load_corpus(const CorpusManifest& manifest, bool with_embeddings = true, std::size_t jobs = 1);

struct SessionReport {
  std::string session_id;
  std::size_t utterances = 0;
  std::map<std::string, std::size_t> labeled;  // rater -> labeled utterance count
  bool has_embeddings = false;
};

struct CorpusIssue {
  std::string session_id;  // empty for corpus-wide problems
  std::string message;
};

struct ValidationReport {
  std::vector<SessionReport> rows;
  std::vector<CorpusIssue> errors;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_corpus(const CorpusManifest& manifest, std::size_t jobs = 1);

}  // namespace dseg
