#include <cstdint>
#include <limits>
#include <set>

#include "dseg/llm.hpp"

namespace dseg {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxObjectCandidates = 64;

json locate_object(std::string_view text, bool strict) {
  if (strict) {
    auto first = text.find_first_not_of(" \t\r\n");
    auto last = text.find_last_not_of(" \t\r\n");
    if (first != std::string_view::npos) {
      auto j = json::parse(text.substr(first, last - first + 1), nullptr, false);
      if (!j.is_discarded() && j.is_object()) return j;
    }
    throw LlmResponseError(LlmResponseError::Kind::kNoJsonObject, "response is not exactly one JSON object",
                           std::string(text));
  }
  auto j = extract_json_object(text);
  if (!j) {
    throw LlmResponseError(LlmResponseError::Kind::kNoJsonObject, "no JSON object found in response",
                           std::string(text));
  }
  return std::move(*j);
}

}  // namespace

std::optional<json> extract_json_object(std::string_view text) {
  std::size_t tried = 0;
  for (auto pos = text.find('{'); pos != std::string_view::npos && tried < kMaxObjectCandidates;
       pos = text.find('{', pos + 1), ++tried) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = pos; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string_view::npos) continue;
    auto j = json::parse(text.substr(pos, end - pos + 1), nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

BoundarySet parse_boundary_response(std::string_view text, std::size_t length, bool strict) {
  if (length == 0) throw ValidationError("dialogue length must be at least 1");
  auto obj = locate_object(text, strict);
  auto it = obj.find("boundary_indices");
  if (it == obj.end() || !it->is_array()) {
    throw LlmResponseError(LlmResponseError::Kind::kMissingField, "response lacks a 'boundary_indices' array",
                           std::string(text));
  }
  std::vector<std::int64_t> raw;
  raw.reserve(it->size());
  for (const auto& v : *it) {
    if (v.is_number_unsigned()) {
      auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw LlmResponseError(LlmResponseError::Kind::kOutOfRange, "boundary index " + v.dump() + " out of range",
                               std::string(text));
      }
      raw.push_back(static_cast<std::int64_t>(u));
    } else if (v.is_number_integer()) {
      raw.push_back(v.get<std::int64_t>());
    } else {
      throw LlmResponseError(LlmResponseError::Kind::kNonInteger, "boundary index " + v.dump() + " is not an integer",
                             std::string(text));
    }
  }
  try {
    return normalize_boundaries(raw, length, true);
  } catch (const NormalizationError& e) {
    throw LlmResponseError(LlmResponseError::Kind::kOutOfRange, e.what(), std::string(text));
  }
}

RaterLabels parse_annotation_response(std::string_view text, const Dialogue& dialogue, const Codebook& codebook,
                                      const std::string& rater_id) {
  auto obj = locate_object(text, false);
  auto it = obj.find("records");
  if (it == obj.end() || !it->is_array()) {
    throw LlmResponseError(LlmResponseError::Kind::kMissingField, "response lacks a 'records' array",
                           std::string(text));
  }
  RaterLabels out{rater_id, {}};
  std::vector<std::string> unknown_ids;
  std::vector<std::string> unknown_moves;
  std::set<std::size_t> seen;
  for (const auto& rec : *it) {
    if (!rec.is_object() || !rec.contains("id")) {
      throw LlmResponseError(LlmResponseError::Kind::kMissingField, "record without an id: " + rec.dump(),
                             std::string(text));
    }
    const auto& id_field = rec["id"];
    std::string id;
    if (id_field.is_string()) {
      id = id_field.get<std::string>();
    } else if (id_field.is_number_integer()) {
      id = id_field.dump();
    } else {
      unknown_ids.push_back(id_field.dump());
      continue;
    }
    auto index = dialogue.find(id);
    if (!index) {
      unknown_ids.push_back(id);
      continue;
    }
    if (!seen.insert(*index).second) {
      unknown_ids.push_back(id + " (repeated)");
      continue;
    }
    auto move = rec.value("move", json(nullptr));
    if (move.is_null()) continue;
    if (!move.is_string()) {
      unknown_moves.push_back(move.dump());
      continue;
    }
    auto name = move.get<std::string>();
    if (name == "None" || name == "none") continue;
    if (!codebook.index_of(name)) {
      unknown_moves.push_back(name);
      continue;
    }
    out.labels[*index] = name;
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!unknown_ids.empty()) {
    throw LlmResponseError(LlmResponseError::Kind::kUnknownId, "records with unknown utterance ids: " + join(unknown_ids),
                           std::string(text));
  }
  if (!unknown_moves.empty()) {
    throw LlmResponseError(LlmResponseError::Kind::kUnknownMove,
                           "records with moves outside the codebook: " + join(unknown_moves), std::string(text));
  }
  return out;
}

}  // namespace dseg
