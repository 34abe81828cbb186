#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "sragmav/errors.hpp"

namespace sragmav {

/// One dataset row: numeric id, source text, annotation string.
struct Sample {
  std::int64_t id = 0;
  std::string content;
  std::string output;

  bool operator==(const Sample&) const = default;
};

/// Loads JSON Lines (one object per line) or a single JSON array, sniffed by
/// the first non-space byte. Rows need integer "id", non-empty string
/// "content", string "output" (may be empty). Duplicate ids are rejected.
std::vector<Sample> load_samples(const std::string& path);

/// Writes JSON Lines, one sample per line, preserving order.
void save_samples(const std::string& path, const std::vector<Sample>& samples);

/// id -> position. Throws DuplicateId on repeats.
std::unordered_map<std::int64_t, std::size_t> index_by_id(
    const std::vector<Sample>& samples);

}  // namespace sragmav
