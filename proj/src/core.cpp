#include "dseg/core.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dseg/errors.hpp"

namespace dseg {

std::optional<std::size_t> Dialogue::find(const std::string& utterance_id) const {
  for (const auto& u : utterances) {
    if (u.id == utterance_id) return u.index;
  }
  return std::nullopt;
}

namespace {

void check_boundaries(std::span<const std::size_t> indices, std::size_t length) {
  if (length == 0) throw ValidationError("dialogue length must be at least 1");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] + 1 >= length) {
      throw ValidationError("boundary index " + std::to_string(indices[i]) +
                            " out of range for dialogue of length " + std::to_string(length));
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw ValidationError("boundary index " + std::to_string(indices[i]) +
                            " is not strictly greater than its predecessor " +
                            std::to_string(indices[i - 1]));
    }
  }
}

std::string render_raw(std::span<const std::int64_t> raw) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < raw.size(); ++i) out << (i ? "," : "") << raw[i];
  out << ']';
  return out.str();
}

}  // namespace

BoundarySet BoundarySet::create(std::vector<std::size_t> indices, std::size_t length) {
  check_boundaries(indices, length);
  return BoundarySet(std::move(indices), length);
}

std::vector<SegmentSpan> induce_segments(std::span<const std::size_t> boundaries, std::size_t length) {
  check_boundaries(boundaries, length);
  std::vector<SegmentSpan> segments;
  segments.reserve(boundaries.size() + 1);
  std::size_t start = 0;
  for (std::size_t cut : boundaries) {
    segments.push_back({start, cut});
    start = cut + 1;
  }
  segments.push_back({start, length - 1});
  return segments;
}

std::vector<SegmentSpan> induce_segments(const BoundarySet& boundaries) {
  return induce_segments(boundaries.indices(), boundaries.dialogue_length());
}

BoundarySet cut_points(std::span<const SegmentSpan> segments) {
  if (segments.empty()) throw ValidationError("cannot read cut points from zero segments");
  if (segments.front().first != 0) throw ValidationError("segments must start at utterance 0");
  std::vector<std::size_t> cuts;
  for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
    if (segments[k + 1].first != segments[k].last + 1) {
      throw ValidationError("segments are not contiguous at segment " + std::to_string(k));
    }
    cuts.push_back(segments[k].last);
  }
  return BoundarySet::create(std::move(cuts), segments.back().last + 1);
}

BoundarySet normalize_boundaries(std::span<const std::int64_t> raw, std::size_t length,
                                 bool final_sentinel) {
  if (length == 0) throw ValidationError("dialogue length must be at least 1");
  std::set<std::int64_t> unique(raw.begin(), raw.end());
  if (final_sentinel) unique.erase(static_cast<std::int64_t>(length) - 1);
  std::vector<std::size_t> kept;
  kept.reserve(unique.size());
  for (std::int64_t v : unique) {
    if (v < 0 || v > static_cast<std::int64_t>(length) - 2) {
      throw NormalizationError("boundary index " + std::to_string(v) +
                                   " outside 0.." + std::to_string(static_cast<std::int64_t>(length) - 2),
                               render_raw(raw));
    }
    kept.push_back(static_cast<std::size_t>(v));
  }
  return BoundarySet::create(std::move(kept), length);
}

std::optional<std::size_t> Codebook::index_of(const std::string& move) const {
  for (std::size_t i = 0; i < moves.size(); ++i) {
    if (moves[i].name == move) return i;
  }
  return std::nullopt;
}

void Codebook::validate() const {
  if (moves.empty()) throw ValidationError("codebook '" + name + "' has no moves");
  std::set<std::string> seen;
  for (const auto& m : moves) {
    if (m.name.empty()) throw ValidationError("codebook '" + name + "' has a move with an empty name");
    std::string lower = m.name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == kNoneCategory) {
      throw ValidationError("move name '" + m.name + "' is reserved for unlabeled utterances");
    }
    if (!seen.insert(m.name).second) {
      throw ValidationError("duplicate move name '" + m.name + "' in codebook '" + name + "'");
    }
  }
}

}  // namespace dseg
