#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "sragmav/retrieval.hpp"

using namespace sragmav;
using testutil::TempDir;

namespace {

std::vector<std::vector<float>> discrete_vectors(std::mt19937_64& rng,
                                                 std::size_t n,
                                                 std::size_t dim) {
  // small integer coordinates provoke exact score ties
  std::uniform_int_distribution<int> coord(-1, 2);
  std::vector<std::vector<float>> out(n, std::vector<float>(dim));
  for (auto& v : out) {
    bool all_zero = true;
    for (auto& x : v) {
      const int c = coord(rng);
      x = static_cast<float>(c);
      all_zero = all_zero && c == 0;
    }
    if (all_zero) {
      v[0] = 1.0f;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("hash embeddings are deterministic and mode-shaped") {
  HashEmbeddingBackend basis(16, 7, HashEmbeddingBackend::Mode::basis);
  const auto a = basis.embed({"some text", "some text", "other"});
  REQUIRE(a.size() == 3);
  CHECK(a[0] == a[1]);
  CHECK(a[0] != a[2]);
  int nonzero = 0;
  for (float x : a[0]) {
    nonzero += x != 0.0f;
  }
  CHECK(nonzero == 1);

  HashEmbeddingBackend gauss(16, 7, HashEmbeddingBackend::Mode::gaussian);
  const auto g1 = gauss.embed({"some text"});
  const auto g2 = gauss.embed({"some text"});
  CHECK(g1 == g2);

  HashEmbeddingBackend gauss_other_seed(16, 8,
                                        HashEmbeddingBackend::Mode::gaussian);
  CHECK(gauss.embed({"x"}) != gauss_other_seed.embed({"x"}));

  CHECK(HashEmbeddingBackend::mode_from_string("basis") ==
        HashEmbeddingBackend::Mode::basis);
  CHECK(HashEmbeddingBackend::mode_from_string("gaussian") ==
        HashEmbeddingBackend::Mode::gaussian);
  CHECK_THROWS_AS(HashEmbeddingBackend::mode_from_string("fourier"),
                  ConfigError);
  CHECK_THROWS_AS(HashEmbeddingBackend(0, 1), ConfigError);
}

TEST_CASE("embed_texts validates the backend's result shape") {
  struct RaggedBackend : EmbeddingBackend {
    std::vector<std::vector<float>> embed(
        const std::vector<std::string>& texts) override {
      std::vector<std::vector<float>> out(texts.size(), {1.0f, 0.0f});
      if (!out.empty()) {
        out.back() = {1.0f};
      }
      return out;
    }
  } ragged;
  CHECK_THROWS_AS(embed_texts({"a", "b"}, ragged), DimMismatch);

  struct ShortBackend : EmbeddingBackend {
    std::vector<std::vector<float>> embed(
        const std::vector<std::string>&) override {
      return {};
    }
  } short_backend;
  CHECK_THROWS_AS(embed_texts({"a"}, short_backend), BackendShapeError);

  HashEmbeddingBackend ok(4, 1);
  CHECK(embed_texts({}, ok).empty());
  CHECK(embed_texts({"a", "b"}, ok).size() == 2);
}

TEST_CASE("index build validates input") {
  const std::vector<std::vector<float>> vecs = {{1.0f, 0.0f}, {0.0f, 1.0f}};
  CHECK_THROWS_AS(VectorIndex::build({1, 1}, vecs), DuplicateId);
  CHECK_THROWS_AS(VectorIndex::build({1}, vecs), DimMismatch);
  CHECK_THROWS_AS(VectorIndex::build({1, 2}, {{1.0f, 0.0f}, {1.0f}}),
                  DimMismatch);
  CHECK_THROWS_AS(VectorIndex::build({1, 2}, {{1.0f, 0.0f}, {0.0f, 0.0f}}),
                  ZeroVector);

  const VectorIndex index = VectorIndex::build({1, 2}, vecs);
  CHECK(index.size() == 2);
  CHECK(index.dim() == 2);
  CHECK(index.contains(1));
  CHECK(!index.contains(3));
  CHECK_THROWS_AS(index.vector_of(3), MissingVector);
}

TEST_CASE("retrieve validates queries and arguments") {
  const VectorIndex index =
      VectorIndex::build({1, 2}, {{1.0f, 0.0f}, {0.0f, 1.0f}});
  const std::vector<float> q = {1.0f, 0.0f};
  CHECK_THROWS_AS(index.retrieve(q, 0), std::invalid_argument);
  CHECK_THROWS_AS(index.retrieve(std::vector<float>{1.0f}, 1), DimMismatch);
  CHECK_THROWS_AS(index.retrieve(std::vector<float>{0.0f, 0.0f}, 1),
                  ZeroVector);

  const VectorIndex empty = VectorIndex::build({}, {});
  CHECK_THROWS_AS(empty.retrieve(q, 1), EmptyIndex);
}

TEST_CASE("retrieve ranks by cosine with ascending-id ties") {
  // ids deliberately unsorted; rows 1 and 3 are identical directions
  const VectorIndex index = VectorIndex::build(
      {9, 2, 5}, {{1.0f, 0.0f}, {2.0f, 0.0f}, {0.0f, 1.0f}});
  const auto hits = index.retrieve(std::vector<float>{1.0f, 0.0f}, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].sample_id == 2);  // tie with 9 broken by id
  CHECK(hits[1].sample_id == 9);
  CHECK(hits[2].sample_id == 5);
  CHECK(hits[0].score == doctest::Approx(1.0));
  CHECK(hits[2].score == doctest::Approx(0.0));

  const auto excluded =
      index.retrieve(std::vector<float>{1.0f, 0.0f}, 3, 2);
  REQUIRE(excluded.size() == 2);
  CHECK(excluded[0].sample_id == 9);

  const auto top1 = index.retrieve(std::vector<float>{1.0f, 0.0f}, 1);
  REQUIRE(top1.size() == 1);
  CHECK(top1[0].sample_id == 2);
}

TEST_CASE("randomized retrieval matches the brute-force oracle exactly") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<std::size_t> n_dist(1, 64);
    std::uniform_int_distribution<std::size_t> dim_dist(1, 8);
    std::uniform_int_distribution<int> k_dist(1, 16);
    const std::size_t n = n_dist(rng);
    const std::size_t dim = dim_dist(rng);
    const int k = k_dist(rng);

    std::vector<std::int64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      ids[i] = static_cast<std::int64_t>(i * 3 + 1);
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto vectors = discrete_vectors(rng, n, dim);

    std::vector<float> query;
    auto query_rows = discrete_vectors(rng, 1, dim);
    query = query_rows[0];

    std::optional<std::int64_t> exclude;
    if (trial % 3 == 0) {
      exclude = ids[trial % n];
    }

    const VectorIndex index = VectorIndex::build(ids, vectors);
    const auto got = index.retrieve(query, k, exclude);
    const auto want = testutil::oracle_retrieve(ids, vectors, query, k, exclude);

    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CAPTURE(trial);
      CAPTURE(i);
      CHECK(got[i].sample_id == want[i].sample_id);
      CHECK(std::abs(got[i].score - want[i].score) <= 1e-12);
    }
  }
}

TEST_CASE("vector files round-trip and validate") {
  TempDir dir;
  const std::string path = dir.file("vectors.bin");

  VectorFile vf;
  vf.dim = 3;
  vf.ids = {10, 20};
  vf.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  write_vector_file(path, vf);

  const VectorFile back = read_vector_file(path);
  CHECK(back.dim == vf.dim);
  CHECK(back.ids == vf.ids);
  CHECK(back.data == vf.data);
  REQUIRE(back.rows() == 2);
  CHECK(back.row(1)[0] == 4.0f);
  CHECK_THROWS_AS(back.row(2), std::out_of_range);

  SUBCASE("bad magic") {
    std::string blob = testutil::read_file(path);
    blob[0] = 'X';
    testutil::write_file(path, blob);
    CHECK_THROWS_AS(read_vector_file(path), IoError);
  }
  SUBCASE("truncated payload") {
    std::string blob = testutil::read_file(path);
    blob.resize(blob.size() - 4);
    testutil::write_file(path, blob);
    CHECK_THROWS_AS(read_vector_file(path), IoError);
  }
  SUBCASE("trailing bytes") {
    std::string blob = testutil::read_file(path);
    blob += "zz";
    testutil::write_file(path, blob);
    CHECK_THROWS_AS(read_vector_file(path), IoError);
  }
  SUBCASE("sidecar row mismatch") {
    testutil::write_file(path + ".ids.jsonl",
                         "{\"row\": 0, \"id\": 10}\n"
                         "{\"row\": 0, \"id\": 20}\n");
    CHECK_THROWS_AS(read_vector_file(path), IoError);
  }
  SUBCASE("sidecar count mismatch") {
    testutil::write_file(path + ".ids.jsonl", "{\"row\": 0, \"id\": 10}\n");
    CHECK_THROWS_AS(read_vector_file(path), IoError);
  }
  SUBCASE("missing sidecar") {
    std::remove((path + ".ids.jsonl").c_str());
    CHECK_THROWS_AS(read_vector_file(path), IoError);
  }
}

TEST_CASE("file embedding backend serves rows positionally") {
  TempDir dir;
  const std::string path = dir.file("vec.bin");
  VectorFile vf;
  vf.dim = 2;
  vf.ids = {1, 2, 3};
  vf.data = {1.0f, 0.0f, 0.0f, 1.0f, 1.0f, 1.0f};
  write_vector_file(path, vf);

  FileEmbeddingBackend backend(path);
  const auto out = backend.embed({"a", "b", "c"});
  REQUIRE(out.size() == 3);
  CHECK(out[2] == std::vector<float>{1.0f, 1.0f});
  CHECK_THROWS_AS(backend.embed({"a"}), BackendShapeError);
}

TEST_CASE("count_duplicate_contents counts repeats after the first") {
  const std::vector<Sample> samples = {
      {1, "aa", ""}, {2, "bb", ""}, {3, "aa", ""}, {4, "aa", ""}};
  CHECK(count_duplicate_contents(samples) == 2);
  CHECK(count_duplicate_contents({}) == 0);
}
