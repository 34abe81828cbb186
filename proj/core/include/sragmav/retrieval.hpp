#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sragmav/dataset.hpp"
#include "sragmav/errors.hpp"

namespace sragmav {

/// Produces one embedding per input text, all with the same dimension.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) = 0;
};

/// Deterministic offline embeddings derived from a text hash.
///   basis:    one-hot at mix(fnv1a64(text), seed) mod dim
///   gaussian: seeded N(0, 1) per component
class HashEmbeddingBackend : public EmbeddingBackend {
 public:
  enum class Mode { basis, gaussian };

  HashEmbeddingBackend(int dim, std::uint64_t seed, Mode mode = Mode::basis);

  std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) override;

  static Mode mode_from_string(std::string_view name);

 private:
  int dim_;
  std::uint64_t seed_;
  Mode mode_;
};

struct RetryPolicy {
  int attempts = 3;
  int initial_delay_ms = 500;
  int max_delay_ms = 8000;
  double multiplier = 2.0;
};

struct HttpEmbeddingOptions {
  std::string url = "http://127.0.0.1:8080/v1/embeddings";
  std::string model = "bge-large-zh-v1.5";
  std::string api_key_env;  // env var holding the bearer token, if any
  int batch_size = 64;
  int timeout_ms = 30000;
  RetryPolicy retry;
};

/// POSTs {"input": [...], "model": ...} and reads data[i].embedding.
class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEmbeddingOptions options);

  std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) override;

 private:
  HttpEmbeddingOptions options_;
};

/// Serves precomputed vectors by position; embed(texts) requires exactly one
/// stored row per text. Used when an external model wrote the vectors.
class FileEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit FileEmbeddingBackend(const std::string& path);

  std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) override;

  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::int64_t> ids_;
  std::vector<float> data_;
};

/// Runs the backend and validates the result shape: one vector per text,
/// consistent non-zero dimension.
std::vector<std::vector<float>> embed_texts(
    const std::vector<std::string>& texts, EmbeddingBackend& backend);

struct RetrievalHit {
  std::int64_t sample_id = 0;
  double score = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

/// Flat cosine index. Vectors are L2-normalized at build time and stored as
/// float32; queries scan every row with double accumulation.
class VectorIndex {
 public:
  /// One vector per id, all the same dimension. Throws DuplicateId,
  /// DimMismatch, or ZeroVector.
  static VectorIndex build(std::vector<std::int64_t> ids,
                           const std::vector<std::vector<float>>& vectors);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }
  bool contains(std::int64_t sample_id) const;

  /// Normalized stored row. Throws MissingVector.
  std::span<const float> vector_of(std::int64_t sample_id) const;

  /// Top-k by cosine score, ties broken by ascending id. `exclude_id` drops
  /// that sample before ranking (self-exclusion during training-pair
  /// construction). Throws EmptyIndex, DimMismatch, ZeroVector,
  /// std::invalid_argument (k < 1).
  std::vector<RetrievalHit> retrieve(
      std::span<const float> query, int k,
      std::optional<std::int64_t> exclude_id = std::nullopt) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::int64_t> ids_;
  std::vector<float> data_;  // row-major, normalized
  std::unordered_map<std::int64_t, std::size_t> row_of_;
};

/// Convenience: index a dataset against parallel vectors (counts must match).
VectorIndex build_index(const std::vector<Sample>& samples,
                        const std::vector<std::vector<float>>& vectors);

/// On-disk vectors: binary file (magic "FGV1", u32 count, u32 dim, f32 data,
/// all little-endian) plus a "<path>.ids.jsonl" sidecar mapping row -> id.
struct VectorFile {
  std::uint32_t dim = 0;
  std::vector<std::int64_t> ids;
  std::vector<float> data;

  std::size_t rows() const noexcept { return ids.size(); }
  std::span<const float> row(std::size_t i) const;
};

void write_vector_file(const std::string& path, const VectorFile& vf);
VectorFile read_vector_file(const std::string& path);

/// How many rows share content with an earlier row. A warning-level signal:
/// duplicates are legal but make retrieval scores degenerate.
std::size_t count_duplicate_contents(const std::vector<Sample>& samples);

}  // namespace sragmav
