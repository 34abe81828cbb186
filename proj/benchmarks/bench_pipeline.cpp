#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "sragmav/annotation.hpp"
#include "sragmav/llmclient.hpp"
#include "sragmav/mav.hpp"
#include "sragmav/retrieval.hpp"
#include "sragmav/scoring.hpp"

namespace {

using namespace sragmav;

std::vector<std::vector<float>> random_vectors(std::size_t n, std::size_t dim,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
  for (auto& row : rows) {
    for (float& x : row) {
      x = gauss(rng);
    }
  }
  return rows;
}

std::vector<std::int64_t> iota_ids(std::size_t n) {
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<std::int64_t>(i + 1);
  }
  return ids;
}

void bm_index_build(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto vectors = random_vectors(n, 64, 7);
  const auto ids = iota_ids(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(VectorIndex::build(ids, vectors));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_index_build)->Arg(256)->Arg(1024)->Arg(4096);

void bm_retrieve_top10(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const VectorIndex index = VectorIndex::build(iota_ids(n), random_vectors(n, 64, 7));
  const auto queries = random_vectors(64, 64, 11);
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.retrieve(queries[q], 10));
    q = (q + 1) % queries.size();
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_retrieve_top10)->Arg(256)->Arg(1024)->Arg(4096);

void bm_hash_embed(benchmark::State& state) {
  HashEmbeddingBackend backend(64, 9, HashEmbeddingBackend::Mode::gaussian);
  std::vector<std::string> texts;
  for (int i = 0; i < 64; ++i) {
    texts.push_back("sample text number " + std::to_string(i) +
                    " with a few more words attached");
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(backend.embed(texts));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(texts.size()));
}
BENCHMARK(bm_hash_embed);

const char* kAnnotation =
    "the mayor | keeps lying to us | non-hate | non-hate [SEP] "
    "newcomers | take every single job in town | Racism | hate [END]";

void bm_parse_quadruplets(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_quadruplets(kAnnotation));
  }
}
BENCHMARK(bm_parse_quadruplets);

void bm_canonicalize(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(canonicalize_answer(kAnnotation, Arity::quadruplet));
  }
}
BENCHMARK(bm_canonicalize);

void bm_similarity(benchmark::State& state) {
  const std::string a(static_cast<std::size_t>(state.range(0)), 'x');
  std::string b = a;
  b[b.size() / 2] = 'y';
  b += "tail";
  for (auto _ : state) {
    benchmark::DoNotOptimize(similarity(a, b));
  }
}
BENCHMARK(bm_similarity)->Arg(16)->Arg(64)->Arg(256);

void bm_score_dataset(benchmark::State& state) {
  std::mt19937_64 rng(23);
  const std::vector<std::string> groups = {"Racism", "Sexism", "Region",
                                           "non-hate"};
  auto random_quad = [&]() {
    Quadruplet q;
    q.target = "target " + std::to_string(rng() % 50);
    q.argument = "argument words " + std::to_string(rng() % 50);
    q.targeted_group = groups[rng() % groups.size()];
    q.hateful =
        q.targeted_group == "non-hate" ? Hateful::non_hate : Hateful::hate;
    return q;
  };
  std::vector<SamplePrediction> preds;
  std::vector<SamplePrediction> golds;
  for (std::int64_t id = 1; id <= 100; ++id) {
    QuadrupletList gold_items = {random_quad(), random_quad(), random_quad()};
    QuadrupletList pred_items = gold_items;
    pred_items[1] = random_quad();
    golds.push_back({id, std::move(gold_items)});
    preds.push_back({id, std::move(pred_items)});
  }
  const MatchPolicy policy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_dataset(preds, golds, policy));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(bm_score_dataset);

void bm_voting_round_trip(benchmark::State& state) {
  class FixedBackend : public GenerationBackend {
   public:
    std::string generate(const std::string&, const GenParams&) override {
      return "a | b | Racism [END]";
    }
  } backend;
  std::vector<std::string> prompts;
  for (int i = 0; i < 10; ++i) {
    prompts.push_back("prompt " + std::to_string(i));
  }
  MavConfig config;
  config.k = 10;
  config.tau = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_mav(prompts, config, {}, backend));
  }
}
BENCHMARK(bm_voting_round_trip)->Arg(10)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
