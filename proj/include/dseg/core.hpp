#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dseg {

struct Utterance {
  std::string id;
  std::size_t index = 0;
  std::string speaker;
  std::string text;
};

struct Dialogue {
  std::string session_id;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  // Index of the utterance with this id, if any.
  std::optional<std::size_t> find(const std::string& utterance_id) const;
};

// Inclusive span of utterance positions [first, last].
struct SegmentSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t length() const { return last - first + 1; }
  bool operator==(const SegmentSpan&) const = default;
};

// Boundary positions for a dialogue of `length` utterances. Position i means
// "cut after utterance i", so every position lies in 0..length-2. Instances
// can only be obtained through validating factories.
class BoundarySet {
 public:
  BoundarySet() = default;

  // Throws ValidationError naming the first offending index.
  static BoundarySet create(std::vector<std::size_t> indices, std::size_t length);

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::size_t dialogue_length() const { return length_; }
  std::size_t segment_count() const { return indices_.size() + 1; }

  bool operator==(const BoundarySet&) const = default;

 private:
  BoundarySet(std::vector<std::size_t> indices, std::size_t length)
      : indices_(std::move(indices)), length_(length) {}

  std::vector<std::size_t> indices_;
  std::size_t length_ = 0;
};

struct Segmentation {
  std::string session_id;
  BoundarySet boundaries;
  std::string method;
  std::string params_fingerprint;
};

struct Move {
  std::string name;
  std::string definition;
  std::vector<std::string> examples;
};

struct Codebook {
  std::string name;
  std::vector<Move> moves;
  // Unlabeled utterances count as an extra reserved category.
  bool none_category_enabled = true;

  std::optional<std::size_t> index_of(const std::string& move) const;
  // C: number of moves, plus one when the reserved category is enabled.
  std::size_t category_count() const { return moves.size() + (none_category_enabled ? 1 : 0); }
  // Throws ValidationError on empty/duplicate/reserved move names.
  void validate() const;
};

inline constexpr const char* kNoneCategory = "none";

struct RaterLabels {
  std::string rater_id;
  std::map<std::size_t, std::string> labels;  // utterance index -> move name
};

// Partition 0..length-1 into |boundaries|+1 contiguous spans. Throws
// ValidationError naming the offending index if the list is unsorted,
// duplicated or out of range.
std::vector<SegmentSpan> induce_segments(std::span<const std::size_t> boundaries, std::size_t length);
std::vector<SegmentSpan> induce_segments(const BoundarySet& boundaries);

// Inverse of induce_segments.
BoundarySet cut_points(std::span<const SegmentSpan> segments);

// Sort and deduplicate a raw index list. With `final_sentinel`, the value
// length-1 is dropped. Anything left outside 0..length-2 raises
// NormalizationError carrying the raw list.
BoundarySet normalize_boundaries(std::span<const std::int64_t> raw, std::size_t length,
                                 bool final_sentinel);

}  // namespace dseg
