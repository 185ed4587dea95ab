#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dseg {

// T unit-norm vectors of dimension `dim`, stored row-major.
struct EmbeddingSequence {
  std::string session_id;
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t size() const { return dim ? values.size() / dim : 0; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Rows further than this from unit length are rescaled on load; rows within it
// are kept verbatim so that reloading a written file is exact.
inline constexpr double kUnitNormTolerance = 1e-6;

// Self-describing matrix container shared by embeddings, memory banks and
// move tables. The binary encoding is
//   "DSEGEMB1" | u32 LE header length | JSON header | row-major f32 LE
// and the JSON encoding is the header object plus a "vectors" array.
enum class ContainerEncoding { kJson, kBinary };

struct MatrixContainer {
  std::string kind;          // "embeddings", "memory_bank", "move_table"
  nlohmann::json header;     // kind-specific fields besides the shape
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::vector<double> values;
};

inline constexpr int kFormatVersion = 1;

std::string encode_container(const MatrixContainer& c, ContainerEncoding encoding);
// Throws ParseError on malformed bytes, shape mismatch or non-finite values.
MatrixContainer decode_container(std::string_view bytes);

// Parse an embeddings container. `expected_rows`, when nonzero, must equal T.
// Zero and non-finite vectors are rejected; others are unit-normalized.
EmbeddingSequence load_embeddings(std::string_view bytes, std::size_t expected_rows = 0);
std::string serialize_embeddings(const EmbeddingSequence& emb, ContainerEncoding encoding);

}  // namespace dseg
