#include "sragmav/pipeline.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "sragmav/errors.hpp"

namespace {

using namespace sragmav;

constexpr const char* kAnswerRain = "rain | soaks the town | non-hate [END]";
constexpr const char* kAnswerJobs = "migrants | steal jobs | Racism [END]";

PipelineConfig base_config() {
  PipelineConfig cfg;
  cfg.mav.k = 2;
  cfg.mav.tau = 3;
  cfg.embedding.dim = 8;
  cfg.embedding.mock_mode = "gaussian";
  return cfg;
}

std::vector<Sample> triplet_train() {
  return {
      {1, "sunny day at the beach", "beach weather | feels wonderful | non-hate [END]"},
      {2, "city traffic jam report", "city traffic | wastes hours | non-hate [END]"},
      {3, "migrants in the labor market", "migrants | steal our jobs | Racism [END]"},
      {4, "women driving the debate", "women drivers | cause every crash | Sexism [END]"},
  };
}

std::vector<Sample> test_set() {
  return {
      {101, "rainstorm flooding the town",
       "rain | soaks the town | non-hate | non-hate [END]"},
      {102, "immigrants and job numbers",
       "migrants | steal jobs | Racism | hate [END]"},
      {103, "mystery text nobody models", "foo | bar | Sexism | hate [END]"},
  };
}

struct Fixture {
  PipelineConfig cfg = base_config();
  std::vector<Sample> train = triplet_train();
  std::vector<Sample> test = test_set();
  HashEmbeddingBackend embedder{8, 77, HashEmbeddingBackend::Mode::gaussian};
  VectorIndex index;
  std::vector<std::vector<float>> test_vectors;
  PromptTemplate tmpl;

  Fixture() {
    std::vector<std::string> train_texts;
    std::vector<std::int64_t> train_ids;
    for (const Sample& s : train) {
      train_texts.push_back(s.content);
      train_ids.push_back(s.id);
    }
    index = VectorIndex::build(train_ids, embed_texts(train_texts, embedder));
    std::vector<std::string> test_texts;
    for (const Sample& s : test) {
      test_texts.push_back(s.content);
    }
    test_vectors = embed_texts(test_texts, embedder);
    tmpl = resolve_template(cfg, Arity::triplet);
  }

  MockSpec deterministic_spec() const {
    MockSpec spec =
        testutil::categorical_spec(7, {"this is not an annotation"}, {1.0});
    spec.rules.emplace_back("rainstorm",
                            MockDistribution{{kAnswerRain}, {1.0}});
    spec.rules.emplace_back("immigrants",
                            MockDistribution{{kAnswerJobs}, {1.0}});
    return spec;
  }

  InferenceResult run(const PipelineToggles& toggles,
                      GenerationBackend& backend) const {
    return run_inference(test, train, index, test_vectors, tmpl, cfg, toggles,
                         backend);
  }
};

}  // namespace

TEST_CASE("inference keeps test order and promotes winners to quadruplets") {
  Fixture fx;
  MockBackend backend(fx.deterministic_spec());
  const InferenceResult result = fx.run({}, backend);

  REQUIRE(result.runs.size() == 3);
  CHECK(result.arity == Arity::triplet);
  CHECK(result.runs[0].id == 101);
  CHECK(result.runs[1].id == 102);
  CHECK(result.runs[2].id == 103);
  for (const SampleRun& run : result.runs) {
    CHECK(run.ok);
  }

  const SampleRun& rain = result.runs[0];
  CHECK(rain.outcome.stopped_by == StopReason::threshold);
  CHECK(rain.outcome.tally.rounds_run == 2);  // k=2 per round, tau=3
  CHECK(rain.outcome.tally.generations == 4);
  CHECK(rain.outcome.winner == kAnswerRain);
  CHECK(rain.outcome.winner_count == 4);
  REQUIRE(rain.quadruplets.size() == 1);
  CHECK(rain.quadruplets[0] ==
        Quadruplet{"rain", "soaks the town", "non-hate", Hateful::non_hate});

  const SampleRun& jobs = result.runs[1];
  REQUIRE(jobs.quadruplets.size() == 1);
  CHECK(jobs.quadruplets[0] ==
        Quadruplet{"migrants", "steal jobs", "Racism", Hateful::hate});

  const SampleRun& junk = result.runs[2];
  CHECK(junk.ok);
  CHECK(junk.outcome.stopped_by == StopReason::max_rounds);
  CHECK(junk.outcome.tally.rounds_run == 6);  // ceil(4 * tau / k)
  CHECK(junk.outcome.tally.discarded == 12);
  CHECK_FALSE(junk.outcome.has_winner);
  CHECK(junk.quadruplets.empty());
}

TEST_CASE("a dead backend aborts voting without failing the sample") {
  Fixture fx;
  MockBackend inner(fx.deterministic_spec());
  testutil::OutageBackend backend(inner, "immigrants");
  const InferenceResult result = fx.run({}, backend);

  REQUIRE(result.runs.size() == 3);
  CHECK(result.runs[0].ok);
  CHECK(result.runs[0].outcome.stopped_by == StopReason::threshold);
  CHECK(result.runs[2].ok);

  const SampleRun& dead = result.runs[1];
  CHECK(dead.ok);
  CHECK(dead.outcome.stopped_by == StopReason::aborted);
  CHECK_FALSE(dead.outcome.has_winner);
  CHECK(dead.quadruplets.empty());
}

TEST_CASE("mismatched test vectors are rejected up front") {
  Fixture fx;
  MockBackend backend(fx.deterministic_spec());
  std::vector<std::vector<float>> short_vectors(fx.test_vectors.begin(),
                                                fx.test_vectors.end() - 1);
  CHECK_THROWS_AS(run_inference(fx.test, fx.train, fx.index, short_vectors,
                                fx.tmpl, fx.cfg, {}, backend),
                  DimMismatch);
}

TEST_CASE("recording votes requires voting") {
  Fixture fx;
  MockBackend backend(fx.deterministic_spec());
  PipelineToggles toggles;
  toggles.no_mav = true;
  toggles.record_votes = true;
  CHECK_THROWS_AS(fx.run(toggles, backend), ConfigError);
}

TEST_CASE("retrieval off means k copies of the zero-shot prompt") {
  Fixture fx;
  fx.cfg.mav.tau = 2;
  PromptBuilder builder(fx.index, fx.train, fx.tmpl, Arity::triplet,
                        fx.cfg.format);

  testutil::ScriptedBackend backend;
  for (const Sample& s : fx.test) {
    backend.script(builder.zero_shot_prompt(s.content), {kAnswerRain});
  }

  PipelineToggles toggles;
  toggles.no_srag = true;
  const InferenceResult result =
      run_inference(fx.test, fx.train, fx.index, {}, fx.tmpl, fx.cfg, toggles,
                    backend);
  for (const SampleRun& run : result.runs) {
    REQUIRE(run.ok);  // any other prompt would hit an unscripted entry
    CHECK(run.outcome.stopped_by == StopReason::threshold);
    CHECK(run.outcome.tally.rounds_run == 1);
    CHECK(run.outcome.tally.generations == 2);
    CHECK(run.outcome.winner == kAnswerRain);
  }
}

TEST_CASE("voting off takes one generation per sample") {
  Fixture fx;
  MockBackend backend(fx.deterministic_spec());
  PipelineToggles toggles;
  toggles.no_mav = true;
  const InferenceResult result = fx.run(toggles, backend);

  const SampleRun& rain = result.runs[0];
  CHECK(rain.ok);
  CHECK(rain.outcome.stopped_by == StopReason::single);
  CHECK(rain.outcome.has_winner);
  CHECK(rain.outcome.winner == kAnswerRain);
  CHECK(rain.outcome.winner_count == 1);
  CHECK(rain.outcome.tally.rounds_run == 1);
  CHECK(rain.outcome.tally.generations == 1);
  REQUIRE(rain.quadruplets.size() == 1);
  CHECK(rain.quadruplets[0].targeted_group == "non-hate");

  const SampleRun& junk = result.runs[2];
  CHECK(junk.ok);
  CHECK(junk.outcome.stopped_by == StopReason::single);
  CHECK_FALSE(junk.outcome.has_winner);
  CHECK(junk.outcome.tally.discarded == 1);
  CHECK(junk.quadruplets.empty());
}

TEST_CASE("voting off propagates transport errors into the sample run") {
  Fixture fx;
  MockBackend inner(fx.deterministic_spec());
  testutil::OutageBackend backend(inner, "immigrants");
  PipelineToggles toggles;
  toggles.no_mav = true;
  const InferenceResult result = fx.run(toggles, backend);

  CHECK(result.runs[0].ok);
  const SampleRun& dead = result.runs[1];
  CHECK_FALSE(dead.ok);
  CHECK(dead.error_kind == "backend_unavailable");
  CHECK_FALSE(dead.error.empty());
  CHECK(result.runs[2].ok);
}

TEST_CASE("reformulation off runs the quadruplet task directly") {
  Fixture fx;
  std::vector<Sample> quad_train = fx.train;
  quad_train[0].output = "beach weather | feels wonderful | non-hate | non-hate [END]";
  quad_train[1].output = "city traffic | wastes hours | non-hate | non-hate [END]";
  quad_train[2].output = "migrants | steal our jobs | Racism | hate [END]";
  quad_train[3].output = "women drivers | cause every crash | Sexism | hate [END]";

  const char* quad_answer = "migrants | steal jobs | Racism | hate [END]";
  MockSpec spec = testutil::categorical_spec(7, {quad_answer}, {1.0});
  MockBackend backend(spec);

  PipelineToggles toggles;
  toggles.no_tr = true;
  const PromptTemplate tmpl = resolve_template(fx.cfg, Arity::quadruplet);
  const InferenceResult result =
      run_inference(fx.test, quad_train, fx.index, fx.test_vectors, tmpl,
                    fx.cfg, toggles, backend);

  CHECK(result.arity == Arity::quadruplet);
  for (const SampleRun& run : result.runs) {
    REQUIRE(run.ok);
    CHECK(run.outcome.winner == quad_answer);
    REQUIRE(run.quadruplets.size() == 1);
    CHECK(run.quadruplets[0] ==
          Quadruplet{"migrants", "steal jobs", "Racism", Hateful::hate});
  }
}

TEST_CASE("worker count does not change outputs") {
  Fixture fx;
  fx.test.push_back({104, "another rainstorm rolls in",
                     "rain | returns | non-hate | non-hate [END]"});
  fx.test.push_back({105, "immigrants in local news",
                     "migrants | steal jobs | Racism | hate [END]"});
  std::vector<std::string> texts;
  for (const Sample& s : fx.test) {
    texts.push_back(s.content);
  }
  fx.test_vectors = embed_texts(texts, fx.embedder);

  testutil::TempDir tmp;
  std::vector<std::string> results_bytes;
  std::vector<std::string> predictions_bytes;
  const std::vector<std::pair<int, int>> grid = {{1, 1}, {4, 4}, {3, 2}};
  for (const auto& [workers, in_flight] : grid) {
    fx.cfg.runtime.workers = workers;
    fx.cfg.runtime.max_in_flight = in_flight;
    MockBackend backend(fx.deterministic_spec());
    const InferenceResult result = fx.run({}, backend);
    const std::string results_path = tmp.file("results.jsonl");
    const std::string preds_path = tmp.file("preds.jsonl");
    write_results(results_path, result, fx.cfg.format);
    write_predictions(preds_path, result, fx.cfg.format);
    results_bytes.push_back(testutil::read_file(results_path));
    predictions_bytes.push_back(testutil::read_file(preds_path));
  }
  CHECK(results_bytes[1] == results_bytes[0]);
  CHECK(results_bytes[2] == results_bytes[0]);
  CHECK(predictions_bytes[1] == predictions_bytes[0]);
  CHECK(predictions_bytes[2] == predictions_bytes[0]);
}

TEST_CASE("results file carries per-sample diagnostics") {
  Fixture fx;
  MockBackend inner(fx.deterministic_spec());
  testutil::OutageBackend backend(inner, "immigrants");
  PipelineToggles toggles;
  toggles.no_mav = true;
  const InferenceResult result = fx.run(toggles, backend);

  testutil::TempDir tmp;
  const std::string path = tmp.file("results.jsonl");
  write_results(path, result, fx.cfg.format);

  std::istringstream in(testutil::read_file(path));
  std::string line;
  REQUIRE(std::getline(in, line));
  const auto rain = nlohmann::json::parse(line);
  CHECK(rain["id"] == 101);
  CHECK(rain["winner"] == kAnswerRain);
  CHECK(rain["stopped_by"] == "single");
  CHECK(rain["rounds"] == 1);
  CHECK(rain["discarded"] == 0);
  REQUIRE(rain["quadruplets"].size() == 1);
  CHECK(rain["quadruplets"][0] ==
        nlohmann::json::array({"rain", "soaks the town", "non-hate", "non-hate"}));
  REQUIRE(rain["counts_top5"].size() == 1);
  CHECK(rain["counts_top5"][0] == nlohmann::json::array({kAnswerRain, 1}));

  REQUIRE(std::getline(in, line));
  const auto dead = nlohmann::json::parse(line);
  CHECK(dead["id"] == 102);
  CHECK(dead["error"]["type"] == "backend_unavailable");
  CHECK_FALSE(dead.contains("winner"));
}

TEST_CASE("predictions round-trip through the file format") {
  Fixture fx;
  MockBackend backend(fx.deterministic_spec());
  const InferenceResult result = fx.run({}, backend);

  testutil::TempDir tmp;
  const std::string path = tmp.file("predictions.jsonl");
  write_predictions(path, result, fx.cfg.format);

  const auto preds = load_predictions(path, fx.cfg.format);
  REQUIRE(preds.size() == 3);
  CHECK(preds[0].id == 101);
  REQUIRE(preds[0].items.size() == 1);
  CHECK(preds[0].items[0] ==
        Quadruplet{"rain", "soaks the town", "non-hate", Hateful::non_hate});
  CHECK(preds[1].id == 102);
  CHECK(preds[2].id == 103);
  CHECK(preds[2].items.empty());  // no winner writes an empty output

  std::istringstream in(testutil::read_file(path));
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::getline(in, line);
  const auto row = nlohmann::json::parse(line);
  CHECK(row == nlohmann::json({{"id", 103}, {"output", ""}}));
}

TEST_CASE("prediction loading rejects broken files") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("preds.jsonl");

  CHECK_THROWS_AS(load_predictions(tmp.file("missing.jsonl")), IoError);

  testutil::write_file(path, "{\"id\": 1, \"output\": \"\"}\nnot json\n");
  CHECK_THROWS_AS(load_predictions(path), IoError);

  testutil::write_file(path, "{\"id\": \"one\", \"output\": \"\"}\n");
  CHECK_THROWS_AS(load_predictions(path), InvalidRecord);

  testutil::write_file(path, "{\"id\": 1}\n");
  CHECK_THROWS_AS(load_predictions(path), InvalidRecord);

  testutil::write_file(
      path, "{\"id\": 1, \"output\": \"\"}\n{\"id\": 2, \"output\": \"junk\"}\n");
  CHECK_THROWS_WITH_AS(load_predictions(path),
                       doctest::Contains(":2"), MalformedAnnotation);

  testutil::write_file(path, "{\"id\": 1, \"output\": \"\"}\n\n");
  CHECK(load_predictions(path).size() == 1);  // blank lines are skipped
}

TEST_CASE("recorded votes survive the file round trip") {
  Fixture fx;
  MockBackend backend(fx.deterministic_spec());
  PipelineToggles toggles;
  toggles.record_votes = true;
  const InferenceResult result = fx.run(toggles, backend);

  VotesMeta meta;
  meta.k = fx.cfg.mav.k;
  meta.tau = fx.cfg.mav.tau;
  meta.max_rounds = 6;
  meta.arity = Arity::triplet;
  meta.per_triplet = false;
  meta.seed = 7;
  const VotesLog log = collect_votes(result, meta);
  REQUIRE(log.records.size() == 3);
  CHECK(log.records[0].id == 101);
  CHECK(log.records[0].rounds.size() == 2);
  CHECK(log.records[0].rounds[0] ==
        RoundVotes{{std::string(kAnswerRain), 2}});
  CHECK_FALSE(log.records[0].aborted);
  CHECK(log.records[2].rounds.size() == 6);
  CHECK(log.records[2].rounds[0].empty());  // every vote was discarded

  testutil::TempDir tmp;
  const std::string path = tmp.file("votes.jsonl");
  write_votes(path, log);
  const VotesLog back = read_votes(path);
  CHECK(back.meta.k == meta.k);
  CHECK(back.meta.tau == meta.tau);
  CHECK(back.meta.max_rounds == meta.max_rounds);
  CHECK(back.meta.arity == meta.arity);
  CHECK(back.meta.per_triplet == meta.per_triplet);
  CHECK(back.meta.seed == meta.seed);
  REQUIRE(back.records.size() == log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    CHECK(back.records[i].id == log.records[i].id);
    CHECK(back.records[i].aborted == log.records[i].aborted);
    CHECK(back.records[i].rounds == log.records[i].rounds);
  }
}

TEST_CASE("vote files without a meta line are rejected") {
  testutil::TempDir tmp;
  const std::string path = tmp.file("votes.jsonl");

  CHECK_THROWS_AS(read_votes(tmp.file("missing.jsonl")), IoError);

  testutil::write_file(path, "");
  CHECK_THROWS_AS(read_votes(path), InvalidRecord);

  testutil::write_file(path, "{\"id\": 1, \"rounds\": []}\n");
  CHECK_THROWS_AS(read_votes(path), InvalidRecord);

  testutil::write_file(path, "not json\n");
  CHECK_THROWS_AS(read_votes(path), IoError);

  testutil::write_file(
      path,
      "{\"meta\": {\"k\": 2, \"tau\": 3, \"max_rounds\": 6, \"arity\": "
      "\"triplet\", \"per_triplet\": false, \"seed\": 7}}\n"
      "{\"id\": 1, \"rounds\": [[[\"lonely\"]]]}\n");
  CHECK_THROWS_AS(read_votes(path), InvalidRecord);
}

namespace {

VotesLog fixture_votes(Fixture& fx) {
  MockBackend backend(fx.deterministic_spec());
  PipelineToggles toggles;
  toggles.record_votes = true;
  const InferenceResult result = fx.run(toggles, backend);
  VotesMeta meta;
  meta.k = fx.cfg.mav.k;
  meta.tau = fx.cfg.mav.tau;
  meta.max_rounds = 6;
  meta.arity = Arity::triplet;
  meta.seed = 7;
  return collect_votes(result, meta);
}

}  // namespace

TEST_CASE("sweeping replays recorded votes across thresholds") {
  Fixture fx;
  const VotesLog log = fixture_votes(fx);

  const TrRule rule{fx.cfg.tr.non_hate_group};
  const MatchPolicy policy;
  testutil::TempDir tmp;
  const auto rows = sweep_from_votes(log, fx.test, rule, fx.cfg.format, policy,
                                     {1, 2, 3}, tmp.file(""));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].tau == 1);
  CHECK(rows[2].tau == 3);

  // the two parseable samples predict exactly their gold quadruplet at any
  // threshold here, the third stays empty: P = 100, R = 66.67, F1 = 80
  for (const SweepRow& row : rows) {
    CHECK(row.hard == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(row.soft == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(row.average == doctest::Approx(80.0).epsilon(1e-12));
  }

  // per-threshold prediction files match the live run's prediction file
  MockBackend backend(fx.deterministic_spec());
  const InferenceResult live = fx.run({}, backend);
  const std::string live_path = tmp.file("live.jsonl");
  write_predictions(live_path, live, fx.cfg.format);
  const std::string live_bytes = testutil::read_file(live_path);
  CHECK(testutil::read_file(tmp.file("predictions_tau_3.jsonl")) == live_bytes);
  CHECK(testutil::read_file(tmp.file("predictions_tau_1.jsonl")) == live_bytes);
}

TEST_CASE("sweeping rejects thresholds the record cannot answer") {
  Fixture fx;
  const VotesLog log = fixture_votes(fx);
  const TrRule rule{fx.cfg.tr.non_hate_group};
  const MatchPolicy policy;

  CHECK_THROWS_AS(
      sweep_from_votes(log, fx.test, rule, fx.cfg.format, policy, {2, 4}, ""),
      TauExceedsRecorded);
  CHECK_THROWS_AS(
      sweep_from_votes(log, fx.test, rule, fx.cfg.format, policy, {0}, ""),
      std::invalid_argument);
}

TEST_CASE("sweep csv uses a fixed header and four decimals") {
  const std::vector<SweepRow> rows = {{1, 0.5, 0.25, 0.375},
                                      {20, 1.0, 2.0 / 3.0, 5.0 / 6.0}};
  CHECK(format_sweep_csv(rows) ==
        "tau,hard,soft,average\n"
        "1,0.5000,0.2500,0.3750\n"
        "20,1.0000,0.6667,0.8333\n");
  CHECK(format_sweep_csv({}) == "tau,hard,soft,average\n");
}

TEST_CASE("default threshold grid stops at the recorded tau") {
  CHECK(default_tau_grid(200) ==
        std::vector<int>{1, 2, 3, 5, 8, 10, 15, 20, 30, 40, 50, 80, 100, 200});
  CHECK(default_tau_grid(10) == std::vector<int>{1, 2, 3, 5, 8, 10});
  CHECK(default_tau_grid(7) == std::vector<int>{1, 2, 3, 5});
  CHECK(default_tau_grid(1) == std::vector<int>{1});
  CHECK(default_tau_grid(0).empty());
}

TEST_CASE("config template fields override the default prompt") {
  PipelineConfig cfg;
  const PromptTemplate def = resolve_template(cfg, Arity::triplet);
  CHECK(def.instruction == default_prompt_template(Arity::triplet, cfg.format,
                                                   TrRule{cfg.tr.non_hate_group})
                               .instruction);

  cfg.tmpl.instruction = "classify {example} then {input}";
  cfg.tmpl.example_format = "sample: {content} -> {answer}";
  const PromptTemplate custom = resolve_template(cfg, Arity::triplet);
  CHECK(custom.instruction == "classify {example} then {input}");
  CHECK(custom.example_format == "sample: {content} -> {answer}");

  cfg.tmpl.instruction = "no placeholders at all";
  CHECK_THROWS_AS(resolve_template(cfg, Arity::triplet), ConfigError);
}
