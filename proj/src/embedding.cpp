#include "dseg/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "dseg/errors.hpp"

namespace dseg {

namespace {

constexpr std::string_view kMagic = "DSEGEMB1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

nlohmann::json full_header(const MatrixContainer& c) {
  nlohmann::json h = c.header.is_object() ? c.header : nlohmann::json::object();
  h["format_version"] = kFormatVersion;
  h["kind"] = c.kind;
  h["d"] = c.dim;
  h["T"] = c.rows;
  return h;
}

void read_shape(const nlohmann::json& h, MatrixContainer& c) {
  if (!h.is_object()) throw ParseError("container header is not a JSON object");
  if (!h.contains("format_version") || h["format_version"] != kFormatVersion) {
    throw ParseError("container format_version missing or unsupported");
  }
  if (!h.contains("kind") || !h["kind"].is_string()) throw ParseError("container header lacks 'kind'");
  if (!h.contains("d") || !h["d"].is_number_unsigned()) throw ParseError("container header lacks 'd'");
  if (!h.contains("T") || !h["T"].is_number_unsigned()) throw ParseError("container header lacks 'T'");
  c.kind = h["kind"].get<std::string>();
  c.dim = h["d"].get<std::size_t>();
  c.rows = h["T"].get<std::size_t>();
  c.header = h;
  for (const char* key : {"format_version", "kind", "d", "T", "vectors"}) c.header.erase(key);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::string encode_container(const MatrixContainer& c, ContainerEncoding encoding) {
  if (c.values.size() != c.dim * c.rows) throw ValidationError("container values do not match d x T");
  auto header = full_header(c);
  if (encoding == ContainerEncoding::kJson) {
    nlohmann::json vectors = nlohmann::json::array();
    for (std::size_t r = 0; r < c.rows; ++r) {
      vectors.push_back(std::vector<double>(c.values.begin() + r * c.dim, c.values.begin() + (r + 1) * c.dim));
    }
    header["vectors"] = std::move(vectors);
    return header.dump() + "\n";
  }
  std::string head = header.dump();
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(head.size()));
  out += head;
  out.reserve(out.size() + c.values.size() * 4);
  for (double v : c.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

MatrixContainer decode_container(std::string_view bytes) {
  MatrixContainer c;
  if (bytes.substr(0, kMagic.size()) == kMagic) {
    if (bytes.size() < kMagic.size() + 4) throw ParseError("truncated container header");
    std::size_t head_len = get_u32(bytes, kMagic.size());
    std::size_t body = kMagic.size() + 4 + head_len;
    if (bytes.size() < body) throw ParseError("truncated container header");
    auto h = nlohmann::json::parse(bytes.substr(kMagic.size() + 4, head_len), nullptr, false);
    if (h.is_discarded()) throw ParseError("container header is not valid JSON");
    read_shape(h, c);
    if (bytes.size() != body + c.dim * c.rows * 4) {
      throw ParseError("container payload size does not match d=" + std::to_string(c.dim) +
                       " T=" + std::to_string(c.rows));
    }
    c.values.resize(c.dim * c.rows);
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      c.values[i] = std::bit_cast<float>(get_u32(bytes, body + 4 * i));
    }
  } else {
    auto j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw ParseError("container is neither binary nor valid JSON");
    read_shape(j, c);
    if (!j.contains("vectors") || !j["vectors"].is_array()) throw ParseError("JSON container lacks 'vectors'");
    const auto& vectors = j["vectors"];
    if (vectors.size() != c.rows) {
      throw ParseError("container declares T=" + std::to_string(c.rows) + " but holds " +
                       std::to_string(vectors.size()) + " vectors");
    }
    c.values.reserve(c.dim * c.rows);
    for (std::size_t r = 0; r < vectors.size(); ++r) {
      const auto& row = vectors[r];
      if (!row.is_array() || row.size() != c.dim) {
        throw ParseError("vector " + std::to_string(r) + " does not have dimension " + std::to_string(c.dim));
      }
      for (const auto& x : row) {
        if (!x.is_number()) throw ParseError("non-finite or non-numeric value in vector " + std::to_string(r));
        c.values.push_back(x.get<double>());
      }
    }
  }
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    if (!std::isfinite(c.values[i])) {
      throw ParseError("non-finite value in vector " + std::to_string(i / c.dim));
    }
  }
  return c;
}

EmbeddingSequence load_embeddings(std::string_view bytes, std::size_t expected_rows) {
  auto c = decode_container(bytes);
  if (c.kind != "embeddings") throw ParseError("expected an embeddings container, got kind '" + c.kind + "'");
  if (c.dim < 2) throw ParseError("embedding dimension must be at least 2, got " + std::to_string(c.dim));
  if (expected_rows && c.rows != expected_rows) {
    throw ParseError("embedding count " + std::to_string(c.rows) + " does not match utterance count " +
                     std::to_string(expected_rows));
  }
  EmbeddingSequence emb;
  emb.session_id = c.header.value("session_id", std::string{});
  emb.dim = c.dim;
  emb.values = std::move(c.values);
  for (std::size_t i = 0; i < emb.size(); ++i) {
    auto row = emb.row(i);
    double n = l2_norm(row);
    if (n == 0.0) throw ParseError("zero embedding vector for utterance " + std::to_string(i));
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      for (double& x : row) x /= n;
    }
  }
  return emb;
}

std::string serialize_embeddings(const EmbeddingSequence& emb, ContainerEncoding encoding) {
  MatrixContainer c;
  c.kind = "embeddings";
  c.header = {{"session_id", emb.session_id}};
  c.dim = emb.dim;
  c.rows = emb.size();
  c.values = emb.values;
  return encode_container(c, encoding);
}

}  // namespace dseg
