#include "sragmav/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "http_json.hpp"
#include "sragmav/text.hpp"

namespace sragmav {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'V', '1'};
constexpr double kMinNorm = 1e-12;

void write_u32_le(std::ostream& out, std::uint32_t v) {
  char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                   static_cast<char>((v >> 16) & 0xFF),
                   static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t read_u32_le(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw IoError(path + ": truncated header");
  }
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::string sidecar_path(const std::string& path) { return path + ".ids.jsonl"; }

double norm_of(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) {
    sum += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(sum);
}

std::uint64_t text_seed(std::string_view text, std::uint64_t seed) {
  return mix64(fnv1a64(text) ^ mix64(seed));
}

}  // namespace

HashEmbeddingBackend::HashEmbeddingBackend(int dim, std::uint64_t seed, Mode mode)
    : dim_(dim), seed_(seed), mode_(mode) {
  if (dim < 1) {
    throw ConfigError("embedding dim must be >= 1");
  }
}

HashEmbeddingBackend::Mode HashEmbeddingBackend::mode_from_string(
    std::string_view name) {
  if (name == "basis") {
    return Mode::basis;
  }
  if (name == "gaussian") {
    return Mode::gaussian;
  }
  throw ConfigError("unknown mock embedding mode \"" + std::string(name) +
                    "\" (expected basis or gaussian)");
}

std::vector<std::vector<float>> HashEmbeddingBackend::embed(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    std::vector<float> v(static_cast<std::size_t>(dim_), 0.0f);
    if (mode_ == Mode::basis) {
      v[text_seed(text, seed_) % static_cast<std::uint64_t>(dim_)] = 1.0f;
    } else {
      std::mt19937_64 rng(text_seed(text, seed_));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (float& x : v) {
        x = static_cast<float>(normal(rng));
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEmbeddingOptions options)
    : options_(std::move(options)) {
  if (options_.batch_size < 1) {
    throw ConfigError("embedding batch_size must be >= 1");
  }
}

std::vector<std::vector<float>> HttpEmbeddingBackend::embed(
    const std::vector<std::string>& texts) {
  const std::string token = detail::bearer_from_env(options_.api_key_env);
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (std::size_t begin = 0; begin < texts.size();
       begin += static_cast<std::size_t>(options_.batch_size)) {
    const std::size_t end =
        std::min(texts.size(), begin + static_cast<std::size_t>(options_.batch_size));
    nlohmann::json body{
        {"input", std::vector<std::string>(texts.begin() + begin, texts.begin() + end)},
        {"model", options_.model}};
    nlohmann::json reply = detail::post_json_with_retry(
        options_.url, body, token, options_.timeout_ms, options_.retry);
    if (!reply.contains("data") || !reply["data"].is_array() ||
        reply["data"].size() != end - begin) {
      throw BackendShapeError("embedding response has no data[" +
                              std::to_string(end - begin) + "] array");
    }
    for (const auto& item : reply["data"]) {
      if (!item.contains("embedding") || !item["embedding"].is_array()) {
        throw BackendShapeError("embedding response item lacks \"embedding\"");
      }
      out.push_back(item["embedding"].get<std::vector<float>>());
    }
  }
  return out;
}

FileEmbeddingBackend::FileEmbeddingBackend(const std::string& path) {
  VectorFile vf = read_vector_file(path);
  dim_ = vf.dim;
  ids_ = std::move(vf.ids);
  data_ = std::move(vf.data);
}

std::vector<std::vector<float>> FileEmbeddingBackend::embed(
    const std::vector<std::string>& texts) {
  if (texts.size() != ids_.size()) {
    throw BackendShapeError("vector file has " + std::to_string(ids_.size()) +
                            " rows but " + std::to_string(texts.size()) +
                            " texts were requested");
  }
  std::vector<std::vector<float>> out;
  out.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const float* row = data_.data() + i * dim_;
    out.emplace_back(row, row + dim_);
  }
  return out;
}

std::vector<std::vector<float>> embed_texts(
    const std::vector<std::string>& texts, EmbeddingBackend& backend) {
  std::vector<std::vector<float>> vectors = backend.embed(texts);
  if (vectors.size() != texts.size()) {
    throw BackendShapeError("backend returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(texts.size()) +
                            " texts");
  }
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != vectors[0].size()) {
      throw DimMismatch("vector " + std::to_string(i) + " has dim " +
                        std::to_string(vectors[i].size()) + ", expected " +
                        std::to_string(vectors[0].size()));
    }
  }
  if (!vectors.empty() && vectors[0].empty()) {
    throw DimMismatch("backend returned zero-dimensional vectors");
  }
  return vectors;
}

VectorIndex VectorIndex::build(std::vector<std::int64_t> ids,
                               const std::vector<std::vector<float>>& vectors) {
  if (ids.size() != vectors.size()) {
    throw DimMismatch("got " + std::to_string(vectors.size()) + " vectors for " +
                      std::to_string(ids.size()) + " ids");
  }
  VectorIndex index;
  index.ids_ = std::move(ids);
  index.dim_ = vectors.empty() ? 0 : vectors[0].size();
  if (!vectors.empty() && index.dim_ == 0) {
    throw DimMismatch("vectors must have dim >= 1");
  }
  index.data_.reserve(vectors.size() * index.dim_);
  index.row_of_.reserve(index.ids_.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != index.dim_) {
      throw DimMismatch("vector for id " + std::to_string(index.ids_[i]) +
                        " has dim " + std::to_string(vectors[i].size()) +
                        ", expected " + std::to_string(index.dim_));
    }
    const double norm = norm_of(vectors[i]);
    if (norm < kMinNorm) {
      throw ZeroVector("vector for id " + std::to_string(index.ids_[i]) +
                       " has zero norm");
    }
    for (float x : vectors[i]) {
      index.data_.push_back(static_cast<float>(x / norm));
    }
    auto [it, inserted] = index.row_of_.emplace(index.ids_[i], i);
    if (!inserted) {
      throw DuplicateId("sample id " + std::to_string(index.ids_[i]) +
                        " appears more than once in the index");
    }
  }
  return index;
}

bool VectorIndex::contains(std::int64_t sample_id) const {
  return row_of_.find(sample_id) != row_of_.end();
}

std::span<const float> VectorIndex::vector_of(std::int64_t sample_id) const {
  auto it = row_of_.find(sample_id);
  if (it == row_of_.end()) {
    throw MissingVector("no vector for sample id " + std::to_string(sample_id));
  }
  return std::span<const float>(data_.data() + it->second * dim_, dim_);
}

std::vector<RetrievalHit> VectorIndex::retrieve(
    std::span<const float> query, int k,
    std::optional<std::int64_t> exclude_id) const {
  if (k < 1) {
    throw std::invalid_argument("retrieve requires k >= 1");
  }
  if (ids_.empty()) {
    throw EmptyIndex("retrieve on an empty index");
  }
  if (query.size() != dim_) {
    throw DimMismatch("query has dim " + std::to_string(query.size()) +
                      ", index has dim " + std::to_string(dim_));
  }
  const double qnorm = norm_of(query);
  if (qnorm < kMinNorm) {
    throw ZeroVector("query vector has zero norm");
  }
  std::vector<double> unit(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) {
    unit[j] = static_cast<double>(query[j]) / qnorm;
  }

  std::vector<RetrievalHit> hits;
  hits.reserve(ids_.size());
  for (std::size_t row = 0; row < ids_.size(); ++row) {
    if (exclude_id && ids_[row] == *exclude_id) {
      continue;
    }
    const float* v = data_.data() + row * dim_;
    double score = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      score += static_cast<double>(v[j]) * unit[j];
    }
    hits.push_back(RetrievalHit{ids_[row], score});
  }
  std::sort(hits.begin(), hits.end(),
            [](const RetrievalHit& a, const RetrievalHit& b) {
              if (a.score != b.score) {
                return a.score > b.score;
              }
              return a.sample_id < b.sample_id;
            });
  if (hits.size() > static_cast<std::size_t>(k)) {
    hits.resize(static_cast<std::size_t>(k));
  }
  return hits;
}

VectorIndex build_index(const std::vector<Sample>& samples,
                        const std::vector<std::vector<float>>& vectors) {
  std::vector<std::int64_t> ids;
  ids.reserve(samples.size());
  for (const Sample& s : samples) {
    ids.push_back(s.id);
  }
  return VectorIndex::build(std::move(ids), vectors);
}

std::span<const float> VectorFile::row(std::size_t i) const {
  if (i >= rows()) {
    throw std::out_of_range("vector file row " + std::to_string(i));
  }
  return std::span<const float>(data.data() + i * dim, dim);
}

void write_vector_file(const std::string& path, const VectorFile& vf) {
  if (vf.dim == 0) {
    throw DimMismatch("vector file dim must be >= 1");
  }
  if (vf.data.size() != vf.rows() * vf.dim) {
    throw DimMismatch("vector file data has " + std::to_string(vf.data.size()) +
                      " floats, expected " + std::to_string(vf.rows() * vf.dim));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write vector file: " + path);
  }
  out.write(kMagic, 4);
  write_u32_le(out, static_cast<std::uint32_t>(vf.rows()));
  write_u32_le(out, vf.dim);
  for (float x : vf.data) {
    write_u32_le(out, std::bit_cast<std::uint32_t>(x));
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
  out.close();

  std::ofstream side(sidecar_path(path), std::ios::binary | std::ios::trunc);
  if (!side) {
    throw IoError("cannot write sidecar: " + sidecar_path(path));
  }
  for (std::size_t i = 0; i < vf.ids.size(); ++i) {
    side << nlohmann::json{{"row", i}, {"id", vf.ids[i]}}.dump() << "\n";
  }
  if (!side) {
    throw IoError("write failed: " + sidecar_path(path));
  }
}

VectorFile read_vector_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open vector file: " + path);
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path + ": bad magic, not a vector file");
  }
  const std::uint32_t count = read_u32_le(in, path);
  const std::uint32_t dim = read_u32_le(in, path);
  if (dim == 0) {
    throw IoError(path + ": dim must be >= 1");
  }
  VectorFile vf;
  vf.dim = dim;
  vf.data.resize(static_cast<std::size_t>(count) * dim);
  for (float& x : vf.data) {
    x = std::bit_cast<float>(read_u32_le(in, path));
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw IoError(path + ": trailing bytes after vector data");
  }

  std::ifstream side(sidecar_path(path), std::ios::binary);
  if (!side) {
    throw IoError("cannot open sidecar: " + sidecar_path(path));
  }
  vf.ids.reserve(count);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(side, line)) {
    if (trim(line).empty()) {
      continue;
    }
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(sidecar_path(path) + ":" + std::to_string(lineno + 1) +
                    ": " + e.what());
    }
    if (!row.contains("row") || !row.contains("id") ||
        row["row"].get<std::size_t>() != lineno) {
      throw IoError(sidecar_path(path) + ": rows must be 0..count-1 in order");
    }
    vf.ids.push_back(row["id"].get<std::int64_t>());
    ++lineno;
  }
  if (vf.ids.size() != count) {
    throw IoError(sidecar_path(path) + ": has " + std::to_string(vf.ids.size()) +
                  " rows, vector file has " + std::to_string(count));
  }
  return vf;
}

std::size_t count_duplicate_contents(const std::vector<Sample>& samples) {
  std::unordered_map<std::string, bool> seen;
  seen.reserve(samples.size());
  std::size_t duplicates = 0;
  for (const Sample& s : samples) {
    auto [it, inserted] = seen.emplace(s.content, true);
    if (!inserted) {
      ++duplicates;
    }
  }
  return duplicates;
}

}  // namespace sragmav
