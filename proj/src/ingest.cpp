#include "dseg/ingest.hpp"

#include <algorithm>
#include <mutex>
#include <set>

#include "dseg/errors.hpp"
#include "dseg/util.hpp"
#include "json.hpp"

namespace dseg {

using nlohmann::json;

namespace {

// Calls fn(object, line_number) for every non-blank line.
template <typename Fn>
void for_each_json_line(std::string_view bytes, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    auto line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    auto obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) throw ParseError("invalid JSON", line_no);
    if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
    fn(obj, line_no);
  }
}

void check_version(const json& obj, std::size_t line_no) {
  if (obj["format_version"] != kFormatVersion) {
    throw ParseError("unsupported format_version " + obj["format_version"].dump(), line_no);
  }
}

// A header line carries format_version and none of the record fields.
bool is_header(const json& obj, std::initializer_list<const char*> record_fields) {
  if (!obj.contains("format_version")) return false;
  return std::none_of(record_fields.begin(), record_fields.end(),
                      [&](const char* f) { return obj.contains(f); });
}

std::string required_string(const json& obj, const char* field, std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) throw ParseError(std::string("missing '") + field + "' field", line_no);
  if (!it->is_string()) throw ParseError(std::string("field '") + field + "' must be a string", line_no);
  return it->get<std::string>();
}

std::string nearest_move(const Codebook& codebook, const std::string& move) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& m : codebook.moves) {
    auto d = edit_distance(move, m.name);
    if (d < best_d) {
      best_d = d;
      best = m.name;
    }
  }
  return best;
}

std::string list_moves(const Codebook& codebook) {
  std::string out;
  for (const auto& m : codebook.moves) out += (out.empty() ? "" : ", ") + m.name;
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (base.empty()) return p.generic_string();
  auto rel = p.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return p.generic_string();
  return rel.generic_string();
}

}  // namespace

Dialogue parse_transcript(std::string_view bytes, const std::string& session_id) {
  Dialogue d;
  d.session_id = session_id;
  std::map<std::string, std::size_t> seen;  // id -> line
  for_each_json_line(bytes, [&](const json& obj, std::size_t line_no) {
    if (is_header(obj, {"id", "speaker", "text"})) {
      check_version(obj, line_no);
      if (d.session_id.empty() && obj.contains("session_id") && obj["session_id"].is_string()) {
        d.session_id = obj["session_id"].get<std::string>();
      }
      return;
    }
    Utterance u;
    u.id = required_string(obj, "id", line_no);
    u.speaker = required_string(obj, "speaker", line_no);
    u.text = required_string(obj, "text", line_no);
    u.index = d.utterances.size();
    auto [it, inserted] = seen.emplace(u.id, line_no);
    if (!inserted) {
      throw ParseError("duplicate utterance id \"" + u.id + "\" on lines " + std::to_string(it->second) +
                           " and " + std::to_string(line_no),
                       line_no);
    }
    d.utterances.push_back(std::move(u));
  });
  if (d.utterances.empty()) throw ParseError("transcript contains zero utterances");
  return d;
}

std::string serialize_transcript(const Dialogue& dialogue) {
  std::string out = json{{"format_version", kFormatVersion}, {"session_id", dialogue.session_id}}.dump() + "\n";
  for (const auto& u : dialogue.utterances) {
    out += json{{"id", u.id}, {"speaker", u.speaker}, {"text", u.text}}.dump() + "\n";
  }
  return out;
}

Codebook parse_codebook(std::string_view bytes) {
  auto j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("codebook is not a JSON object");
  if (j.contains("format_version")) check_version(j, 0);
  Codebook cb;
  cb.name = j.value("name", std::string{});
  cb.none_category_enabled = j.value("none_category", true);
  if (!j.contains("moves") || !j["moves"].is_array()) throw ParseError("codebook lacks a 'moves' array");
  for (const auto& m : j["moves"]) {
    if (!m.is_object()) throw ParseError("codebook move is not an object");
    Move move;
    move.name = required_string(m, "name", 0);
    move.definition = m.value("definition", std::string{});
    if (m.contains("examples")) {
      if (!m["examples"].is_array()) throw ParseError("examples of move '" + move.name + "' must be an array");
      for (const auto& e : m["examples"]) {
        if (!e.is_string()) throw ParseError("examples of move '" + move.name + "' must be strings");
        move.examples.push_back(e.get<std::string>());
      }
    }
    cb.moves.push_back(std::move(move));
  }
  cb.validate();
  return cb;
}

std::string serialize_codebook(const Codebook& codebook) {
  json moves = json::array();
  for (const auto& m : codebook.moves) {
    moves.push_back({{"name", m.name}, {"definition", m.definition}, {"examples", m.examples}});
  }
  json j{{"format_version", kFormatVersion},
         {"name", codebook.name},
         {"none_category", codebook.none_category_enabled},
         {"moves", moves}};
  return j.dump(2) + "\n";
}

std::string serialize_segmentation(const Segmentation& segmentation) {
  json j{{"format_version", kFormatVersion},
         {"session_id", segmentation.session_id},
         {"method", segmentation.method},
         {"params_fingerprint", segmentation.params_fingerprint},
         {"boundary_indices", segmentation.boundaries.indices()}};
  return j.dump(2) + "\n";
}

Segmentation parse_segmentation(std::string_view bytes, std::size_t length) {
  auto j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("segmentation file is not a JSON object");
  for (const char* key : {"session_id", "boundary_indices"}) {
    if (!j.contains(key)) throw ParseError(std::string("segmentation file lacks '") + key + "'");
  }
  if (j.value("format_version", kFormatVersion) != kFormatVersion) {
    throw ParseError("unsupported segmentation format_version " + j["format_version"].dump());
  }
  if (!j["boundary_indices"].is_array()) throw ParseError("'boundary_indices' must be an array");
  std::vector<std::size_t> indices;
  for (const auto& v : j["boundary_indices"]) {
    if (!v.is_number_unsigned()) throw ParseError("boundary index " + v.dump() + " is not a non-negative integer");
    indices.push_back(v.get<std::size_t>());
  }
  Segmentation s;
  s.session_id = j["session_id"].get<std::string>();
  s.method = j.value("method", std::string{});
  s.params_fingerprint = j.value("params_fingerprint", std::string{});
  try {
    s.boundaries = BoundarySet::create(std::move(indices), length);
  } catch (const ValidationError& e) {
    throw ParseError("segmentation for '" + s.session_id + "': " + e.what());
  }
  return s;
}

std::map<std::string, RaterLabels> parse_labels(std::string_view bytes, const std::string& rater_id,
                                                const Codebook& codebook,
                                                std::span<const Dialogue> dialogues) {
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : dialogues) by_id[d.session_id] = &d;
  std::map<std::string, RaterLabels> out;
  std::set<std::pair<std::string, std::size_t>> seen;
  for_each_json_line(bytes, [&](const json& obj, std::size_t line_no) {
    if (is_header(obj, {"session_id", "utterance_id", "move"}) ||
        (obj.contains("format_version") && !obj.contains("utterance_id"))) {
      check_version(obj, line_no);
      return;
    }
    auto session = required_string(obj, "session_id", line_no);
    auto utt = required_string(obj, "utterance_id", line_no);
    auto d = by_id.find(session);
    if (d == by_id.end()) throw ParseError("labels reference unknown session '" + session + "'", line_no);
    auto index = d->second->find(utt);
    if (!index) {
      throw ParseError("unknown utterance id '" + utt + "' in session '" + session + "'", line_no);
    }
    if (!seen.emplace(session, *index).second) {
      throw ParseError("utterance '" + utt + "' in session '" + session + "' labeled twice", line_no);
    }
    auto& rl = out[session];
    rl.rater_id = rater_id;
    auto move_it = obj.find("move");
    if (move_it == obj.end()) throw ParseError("missing 'move' field", line_no);
    if (move_it->is_null()) return;
    if (!move_it->is_string()) throw ParseError("field 'move' must be a string or null", line_no);
    auto move = move_it->get<std::string>();
    if (!codebook.index_of(move)) {
      throw ParseError("unknown move '" + move + "' (did you mean '" + nearest_move(codebook, move) +
                           "'? valid moves: " + list_moves(codebook) + ")",
                       line_no);
    }
    rl.labels[*index] = std::move(move);
  });
  return out;
}

std::string serialize_labels(const std::string& rater_id, const std::map<std::string, RaterLabels>& labels,
                             std::span<const Dialogue> dialogues) {
  std::string out = json{{"format_version", kFormatVersion}, {"rater_id", rater_id}}.dump() + "\n";
  for (const auto& d : dialogues) {
    auto it = labels.find(d.session_id);
    if (it == labels.end()) continue;
    for (const auto& [index, move] : it->second.labels) {
      if (index >= d.size()) throw ValidationError("label index out of range in session " + d.session_id);
      out += json{{"session_id", d.session_id}, {"utterance_id", d.utterances[index].id}, {"move", move}}.dump() +
             "\n";
    }
  }
  return out;
}

CorpusManifest parse_manifest(std::string_view bytes, const std::filesystem::path& base_dir) {
  auto j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("manifest is not a JSON object");
  if (j.contains("format_version")) check_version(j, 0);
  CorpusManifest m;
  m.codebook_path = resolve(base_dir, required_string(j, "codebook", 0));
  if (!j.contains("sessions") || !j["sessions"].is_array()) throw ParseError("manifest lacks a 'sessions' array");
  std::set<std::string> ids;
  for (const auto& s : j["sessions"]) {
    if (!s.is_object()) throw ParseError("manifest session entry is not an object");
    ManifestSession ms;
    ms.session_id = required_string(s, "session_id", 0);
    ms.transcript_path = resolve(base_dir, required_string(s, "transcript", 0));
    if (s.contains("embeddings") && !s["embeddings"].is_null()) {
      ms.embedding_path = resolve(base_dir, required_string(s, "embeddings", 0));
    }
    if (!ids.insert(ms.session_id).second) throw ParseError("duplicate session_id '" + ms.session_id + "'");
    m.sessions.push_back(std::move(ms));
  }
  if (j.contains("label_files")) {
    for (const auto& l : j["label_files"]) {
      if (!l.is_object()) throw ParseError("manifest label_files entry is not an object");
      m.label_files.push_back({required_string(l, "rater_id", 0), resolve(base_dir, required_string(l, "path", 0))});
    }
  }
  return m;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

std::string serialize_manifest(const CorpusManifest& manifest, const std::filesystem::path& base_dir) {
  json sessions = json::array();
  for (const auto& s : manifest.sessions) {
    json e{{"session_id", s.session_id}, {"transcript", relative_to(s.transcript_path, base_dir)}};
    if (s.embedding_path) e["embeddings"] = relative_to(*s.embedding_path, base_dir);
    sessions.push_back(std::move(e));
  }
  json labels = json::array();
  for (const auto& l : manifest.label_files) {
    labels.push_back({{"rater_id", l.rater_id}, {"path", relative_to(l.path, base_dir)}});
  }
  json j{{"format_version", kFormatVersion},
         {"codebook", relative_to(manifest.codebook_path, base_dir)},
         {"sessions", sessions},
         {"label_files", labels}};
  return j.dump(2) + "\n";
}

const SessionData* Corpus::find(const std::string& session_id) const {
  for (const auto& s : sessions) {
    if (s.dialogue.session_id == session_id) return &s;
  }
  return nullptr;
}

RaterLabels Corpus::labels_for(const std::string& rater_id, const std::string& session_id) const {
  RaterLabels empty{rater_id, {}};
  auto r = labels.find(rater_id);
  if (r == labels.end()) return empty;
  auto s = r->second.find(session_id);
  return s == r->second.end() ? empty : s->second;
}

std::vector<Dialogue> Corpus::dialogues() const {
  std::vector<Dialogue> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back(s.dialogue);
  return out;
}

namespace {

SessionData load_session(const ManifestSession& ms, bool with_embeddings) {
  SessionData sd;
  sd.dialogue = parse_transcript(read_file(ms.transcript_path), ms.session_id);
  sd.dialogue.session_id = ms.session_id;
  if (with_embeddings && ms.embedding_path) {
    sd.embeddings = load_embeddings(read_file(*ms.embedding_path), sd.dialogue.size());
    sd.embeddings->session_id = ms.session_id;
  }
  return sd;
}

}  // namespace

Corpus load_corpus(const CorpusManifest& manifest, bool with_embeddings, std::size_t jobs) {
  Corpus corpus;
  corpus.codebook = parse_codebook(read_file(manifest.codebook_path));
  corpus.sessions.resize(manifest.sessions.size());
  parallel_for(manifest.sessions.size(), jobs, [&](std::size_t i) {
    try {
      corpus.sessions[i] = load_session(manifest.sessions[i], with_embeddings);
    } catch (const Error& e) {
      throw Error("session " + manifest.sessions[i].session_id + ": " + e.what());
    }
  });
  auto dialogues = corpus.dialogues();
  for (const auto& lf : manifest.label_files) {
    try {
      auto parsed = parse_labels(read_file(lf.path), lf.rater_id, corpus.codebook, dialogues);
      auto& dest = corpus.labels[lf.rater_id];
      for (auto& [session, rl] : parsed) {
        auto& slot = dest[session];
        slot.rater_id = lf.rater_id;
        for (auto& [idx, move] : rl.labels) {
          if (!slot.labels.emplace(idx, move).second) {
            throw ParseError("utterance " + std::to_string(idx) + " of session '" + session +
                             "' labeled by more than one file for rater '" + lf.rater_id + "'");
          }
        }
      }
    } catch (const Error& e) {
      throw Error(lf.path.string() + ": " + e.what());
    }
  }
  return corpus;
}

ValidationReport validate_corpus(const CorpusManifest& manifest, std::size_t jobs) {
  ValidationReport report;
  Codebook codebook;
  bool codebook_ok = true;
  try {
    codebook = parse_codebook(read_file(manifest.codebook_path));
  } catch (const Error& e) {
    report.errors.push_back({"", manifest.codebook_path.string() + ": " + e.what()});
    codebook_ok = false;
  }

  std::vector<std::optional<SessionData>> loaded(manifest.sessions.size());
  std::vector<std::string> session_errors(manifest.sessions.size());
  parallel_for(manifest.sessions.size(), jobs, [&](std::size_t i) {
    try {
      loaded[i] = load_session(manifest.sessions[i], true);
    } catch (const Error& e) {
      session_errors[i] = e.what();
    }
  });

  std::vector<Dialogue> dialogues;
  for (std::size_t i = 0; i < manifest.sessions.size(); ++i) {
    const auto& ms = manifest.sessions[i];
    if (!session_errors[i].empty()) {
      report.errors.push_back({ms.session_id, session_errors[i]});
      continue;
    }
    SessionReport row;
    row.session_id = ms.session_id;
    row.utterances = loaded[i]->dialogue.size();
    row.has_embeddings = loaded[i]->embeddings.has_value();
    report.rows.push_back(std::move(row));
    dialogues.push_back(loaded[i]->dialogue);
  }

  std::set<std::string> known;
  for (const auto& ms : manifest.sessions) known.insert(ms.session_id);

  for (const auto& lf : manifest.label_files) {
    std::string bytes;
    try {
      bytes = read_file(lf.path);
    } catch (const Error& e) {
      report.errors.push_back({"", e.what()});
      continue;
    }
    // Sessions are checked line by line first so every unknown id is reported.
    try {
      for_each_json_line(bytes, [&](const json& obj, std::size_t line_no) {
        if (!obj.contains("session_id") || !obj.contains("utterance_id")) return;
        if (!obj["session_id"].is_string()) return;
        auto s = obj["session_id"].get<std::string>();
        if (!known.count(s)) {
          report.errors.push_back({s, lf.path.string() + ":" + std::to_string(line_no) + ": rater '" +
                                          lf.rater_id + "' labels unknown session '" + s + "'"});
        }
      });
    } catch (const Error& e) {
      report.errors.push_back({"", lf.path.string() + ": " + e.what()});
      continue;
    }
    if (!codebook_ok) continue;
    // Re-parse per line against loaded sessions to collect all remaining issues.
    std::map<std::string, const Dialogue*> by_id;
    for (const auto& d : dialogues) by_id[d.session_id] = &d;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
      std::size_t end = bytes.find('\n', pos);
      if (end == std::string::npos) end = bytes.size();
      auto line = std::string_view(bytes).substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      auto obj = json::parse(line, nullptr, false);
      if (!obj.is_object() || !obj.contains("session_id") || !obj["session_id"].is_string()) continue;
      auto s = obj["session_id"].get<std::string>();
      auto d = by_id.find(s);
      if (d == by_id.end()) continue;
      try {
        std::string padded(line);
        padded += "\n";
        parse_labels(padded, lf.rater_id, codebook, std::span<const Dialogue>(d->second, 1));
      } catch (const Error& e) {
        report.errors.push_back({s, lf.path.string() + ":" + std::to_string(line_no) + ": " + e.what()});
      }
    }
  }

  if (codebook_ok && report.errors.empty()) {
    try {
      Corpus corpus;
      corpus.codebook = codebook;
      for (auto& l : loaded) corpus.sessions.push_back(*l);
      for (const auto& lf : manifest.label_files) {
        auto parsed = parse_labels(read_file(lf.path), lf.rater_id, codebook, dialogues);
        for (auto& [session, rl] : parsed) {
          auto& slot = corpus.labels[lf.rater_id][session];
          for (auto& [idx, move] : rl.labels) slot.labels.emplace(idx, move);
        }
      }
      for (auto& row : report.rows) {
        for (const auto& lf : manifest.label_files) {
          row.labeled[lf.rater_id] = corpus.labels_for(lf.rater_id, row.session_id).labels.size();
        }
      }
    } catch (const Error& e) {
      report.errors.push_back({"", e.what()});
    }
  }
  return report;
}

}  // namespace dseg
