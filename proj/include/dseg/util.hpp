#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace dseg {

// 64-bit FNV-1a; used for fingerprints and digests, not for security.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex_digest(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
// Write via a temporary sibling and rename so readers never see torn files.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Run body(i) for i in [0, count) on up to `jobs` threads. The first
// exception thrown by any worker is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

// Levenshtein distance, used for "did you mean" hints.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace dseg
