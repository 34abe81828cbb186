#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sragmav/config.hpp"
#include "sragmav/dataset.hpp"
#include "sragmav/errors.hpp"
#include "sragmav/llmclient.hpp"
#include "sragmav/mav.hpp"
#include "sragmav/pipeline.hpp"
#include "sragmav/promptgen.hpp"
#include "sragmav/reformulate.hpp"
#include "sragmav/retrieval.hpp"
#include "sragmav/scoring.hpp"

namespace {

using nlohmann::json;
using namespace sragmav;

struct GlobalOpts {
  std::string config_path;
  std::optional<std::int64_t> seed;
  PipelineToggles toggles;
};

PipelineConfig effective_config(const GlobalOpts& global) {
  PipelineConfig cfg;
  if (!global.config_path.empty()) {
    cfg = load_config(global.config_path);
  }
  if (global.seed) {
    if (*global.seed < 0) {
      throw ConfigError("--seed must be >= 0");
    }
    cfg.runtime.seed = static_cast<std::uint64_t>(*global.seed);
  }
  cfg.validate();
  return cfg;
}

std::unique_ptr<EmbeddingBackend> make_embedding_backend(
    const PipelineConfig& cfg) {
  if (cfg.embedding.backend == "mock") {
    return std::make_unique<HashEmbeddingBackend>(
        cfg.embedding.dim, cfg.runtime.seed,
        HashEmbeddingBackend::mode_from_string(cfg.embedding.mock_mode));
  }
  if (cfg.embedding.backend == "http") {
    HttpEmbeddingOptions options;
    options.url = cfg.embedding.url;
    options.model = cfg.embedding.model;
    options.api_key_env = cfg.embedding.api_key_env;
    options.batch_size = cfg.embedding.batch_size;
    options.timeout_ms = cfg.embedding.timeout_ms;
    return std::make_unique<HttpEmbeddingBackend>(std::move(options));
  }
  if (cfg.embedding.vectors.empty()) {
    throw ConfigError("embedding.backend = \"file\" needs embedding.vectors");
  }
  return std::make_unique<FileEmbeddingBackend>(cfg.embedding.vectors);
}

std::unique_ptr<GenerationBackend> make_generation_backend(
    const PipelineConfig& cfg) {
  if (cfg.llm.backend == "mock") {
    if (cfg.llm.mock_spec.empty()) {
      throw ConfigError("llm.backend = \"mock\" needs llm.mock_spec");
    }
    MockSpec spec = load_mock_spec(cfg.llm.mock_spec);
    if (cfg.runtime.seed != 0) {
      spec.seed = cfg.runtime.seed;
    }
    return std::make_unique<MockBackend>(std::move(spec));
  }
  HttpChatOptions options;
  options.url = cfg.llm.url;
  options.model = cfg.llm.model;
  options.api_key_env = cfg.llm.api_key_env;
  options.timeout_ms = cfg.llm.timeout_ms;
  options.append_missing_stop = cfg.llm.append_missing_stop;
  options.retry = RetryPolicy{cfg.llm.retry_attempts, cfg.llm.retry_initial_ms,
                              cfg.llm.retry_max_ms, cfg.llm.retry_multiplier};
  return std::make_unique<HttpChatBackend>(std::move(options));
}

/// Reorders file rows to dataset order by sample id.
std::vector<std::vector<float>> align_vectors(const VectorFile& vf,
                                              const std::vector<Sample>& samples) {
  std::unordered_map<std::int64_t, std::size_t> row_of;
  row_of.reserve(vf.ids.size());
  for (std::size_t i = 0; i < vf.ids.size(); ++i) {
    if (!row_of.emplace(vf.ids[i], i).second) {
      throw DuplicateId("vector file repeats sample id " +
                        std::to_string(vf.ids[i]));
    }
  }
  std::vector<std::vector<float>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    auto it = row_of.find(s.id);
    if (it == row_of.end()) {
      throw MissingVector("vector file has no row for sample id " +
                          std::to_string(s.id));
    }
    const auto row = vf.row(it->second);
    out.emplace_back(row.begin(), row.end());
  }
  return out;
}

std::string path_join(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") {
    return name;
  }
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write: " + path);
  }
  out << text;
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

int run_transform(const GlobalOpts& global, const std::string& in_path,
                  const std::string& out_path, const std::string& report_path,
                  const std::string& on_violation) {
  const PipelineConfig cfg = effective_config(global);
  const TrRule rule{cfg.tr.non_hate_group};
  const ViolationPolicy policy = violation_policy_from_string(
      on_violation.empty() ? cfg.tr.on_violation : on_violation);

  const std::vector<Sample> quads = load_samples(in_path);
  const TransformResult result =
      transform_dataset(quads, rule, cfg.format, policy);
  save_samples(out_path, result.samples);

  if (!report_path.empty()) {
    json violations = json::array();
    for (const TransformViolation& v : result.violations) {
      violations.push_back(json{
          {"id", v.sample_id}, {"record", v.record}, {"reason", v.reason}});
    }
    write_text(report_path,
               json{{"input_samples", quads.size()},
                    {"output_samples", result.samples.size()},
                    {"dropped_sample_ids", result.dropped_samples},
                    {"violations", std::move(violations)}}
                   .dump(2) +
                   "\n");
  }
  std::cerr << "transform: " << quads.size() << " samples in, "
            << result.samples.size() << " out, " << result.violations.size()
            << " records skipped, " << result.dropped_samples.size()
            << " samples dropped\n";
  return 0;
}

int run_embed(const GlobalOpts& global, const std::string& in_path,
              const std::string& out_path) {
  const PipelineConfig cfg = effective_config(global);
  const std::vector<Sample> samples = load_samples(in_path);
  std::vector<std::string> texts;
  texts.reserve(samples.size());
  for (const Sample& s : samples) {
    texts.push_back(s.content);
  }
  auto backend = make_embedding_backend(cfg);
  const auto vectors = embed_texts(texts, *backend);

  VectorFile vf;
  vf.dim = static_cast<std::uint32_t>(vectors.empty() ? 0 : vectors[0].size());
  for (const Sample& s : samples) {
    vf.ids.push_back(s.id);
  }
  for (const auto& v : vectors) {
    vf.data.insert(vf.data.end(), v.begin(), v.end());
  }
  write_vector_file(out_path, vf);
  std::cerr << "embed: wrote " << vf.rows() << " x " << vf.dim
            << " vectors to " << out_path << "\n";
  return 0;
}

int run_index(const GlobalOpts& global, const std::string& vectors_path,
              const std::string& out_path, const std::string& dataset_path) {
  const PipelineConfig cfg = effective_config(global);
  (void)cfg;
  const VectorFile vf = read_vector_file(vectors_path);
  std::vector<std::vector<float>> rows;
  rows.reserve(vf.rows());
  for (std::size_t i = 0; i < vf.rows(); ++i) {
    const auto row = vf.row(i);
    rows.emplace_back(row.begin(), row.end());
  }
  const VectorIndex index = VectorIndex::build(vf.ids, rows);

  if (!dataset_path.empty()) {
    const std::vector<Sample> samples = load_samples(dataset_path);
    if (samples.size() != index.size()) {
      throw IdMismatch("dataset has " + std::to_string(samples.size()) +
                       " samples, vectors have " + std::to_string(index.size()));
    }
    for (const Sample& s : samples) {
      if (!index.contains(s.id)) {
        throw IdMismatch("no vector for dataset sample id " +
                         std::to_string(s.id));
      }
    }
    const std::size_t duplicates = count_duplicate_contents(samples);
    if (duplicates > 0) {
      std::cerr << "index: warning: " << duplicates
                << " samples share content with an earlier sample; their "
                   "retrieval scores will tie\n";
    }
  }

  VectorFile normalized;
  normalized.dim = vf.dim;
  normalized.ids = vf.ids;
  normalized.data.reserve(vf.data.size());
  for (std::int64_t id : normalized.ids) {
    const auto row = index.vector_of(id);
    normalized.data.insert(normalized.data.end(), row.begin(), row.end());
  }
  write_vector_file(out_path, normalized);
  std::cerr << "index: " << index.size() << " vectors (dim " << index.dim()
            << ") -> " << out_path << "\n";
  return 0;
}

int run_prep_train(const GlobalOpts& global, const std::string& train_path,
                   const std::string& index_path, const std::string& out_path,
                   const std::string& layout_name) {
  const PipelineConfig cfg = effective_config(global);
  const Arity arity =
      global.toggles.no_tr ? Arity::quadruplet : Arity::triplet;
  const PromptTemplate tmpl = resolve_template(cfg, arity);
  const PairLayout layout = pair_layout_from_string(layout_name);
  const std::vector<Sample> train = load_samples(train_path);

  std::vector<TrainingPair> pairs;
  if (global.toggles.no_srag) {
    PromptTemplate zero = tmpl;
    pairs.reserve(train.size());
    for (const Sample& s : train) {
      try {
        if (arity == Arity::triplet) {
          parse_triplets(s.output, cfg.format);
        } else {
          parse_quadruplets(s.output, cfg.format);
        }
      } catch (const MalformedAnnotation& e) {
        throw MalformedAnnotation("completion for sample " +
                                  std::to_string(s.id) + " does not parse: " +
                                  e.what());
      }
      pairs.push_back(TrainingPair{zero.render("", s.content), s.output});
    }
  } else {
    if (index_path.empty()) {
      throw ConfigError("prep-train needs --index (or --no-srag)");
    }
    const VectorFile vf = read_vector_file(index_path);
    std::vector<std::vector<float>> rows;
    rows.reserve(vf.rows());
    for (std::size_t i = 0; i < vf.rows(); ++i) {
      const auto row = vf.row(i);
      rows.emplace_back(row.begin(), row.end());
    }
    const VectorIndex index = VectorIndex::build(vf.ids, rows);
    PromptBuilder builder(index, train, tmpl, arity, cfg.format);
    pairs = builder.build_training_pairs();
  }

  write_training_pairs(out_path, pairs, layout);
  std::cerr << "prep-train: wrote " << pairs.size() << " pairs to " << out_path
            << "\n";
  return 0;
}

int run_infer(const GlobalOpts& global, const std::string& train_path,
              const std::string& index_path, const std::string& test_path,
              const std::string& test_vectors_path, const std::string& out_dir) {
  const PipelineConfig cfg = effective_config(global);
  const Arity arity =
      global.toggles.no_tr ? Arity::quadruplet : Arity::triplet;
  const std::vector<Sample> train = load_samples(train_path);
  const std::vector<Sample> test = load_samples(test_path);

  const VectorFile vf = read_vector_file(index_path);
  std::vector<std::vector<float>> rows;
  rows.reserve(vf.rows());
  for (std::size_t i = 0; i < vf.rows(); ++i) {
    const auto row = vf.row(i);
    rows.emplace_back(row.begin(), row.end());
  }
  const VectorIndex index = VectorIndex::build(vf.ids, rows);

  std::vector<std::vector<float>> test_vectors;
  if (!global.toggles.no_srag) {
    if (!test_vectors_path.empty()) {
      test_vectors = align_vectors(read_vector_file(test_vectors_path), test);
    } else {
      std::vector<std::string> texts;
      texts.reserve(test.size());
      for (const Sample& s : test) {
        texts.push_back(s.content);
      }
      auto embedder = make_embedding_backend(cfg);
      test_vectors = embed_texts(texts, *embedder);
    }
  }

  const PromptTemplate tmpl = resolve_template(cfg, arity);
  auto backend = make_generation_backend(cfg);
  const InferenceResult result =
      run_inference(test, train, index, test_vectors, tmpl, cfg,
                    global.toggles, *backend);

  std::filesystem::create_directories(out_dir);
  write_results(path_join(out_dir, "results.jsonl"), result, cfg.format);
  write_predictions(path_join(out_dir, "predictions.jsonl"), result, cfg.format);
  if (global.toggles.record_votes) {
    MavConfig mav;
    mav.k = cfg.mav.k;
    mav.tau = cfg.mav.tau;
    mav.max_rounds = cfg.mav.max_rounds;
    VotesMeta meta{cfg.mav.k, cfg.mav.tau, mav.effective_max_rounds(), arity,
                   cfg.mav.per_triplet_voting, cfg.runtime.seed};
    write_votes(path_join(out_dir, "votes.jsonl"), collect_votes(result, meta));
  }

  std::size_t failed = 0;
  long rounds = 0;
  for (const SampleRun& run : result.runs) {
    failed += run.ok ? 0 : 1;
    rounds += run.outcome.tally.rounds_run;
  }
  std::cerr << "infer: " << result.runs.size() << " samples, " << failed
            << " failed, " << rounds << " voting rounds total\n";
  return 0;
}

int run_eval(const GlobalOpts& global, const std::string& pred_path,
             const std::string& gold_path, const std::string& report_path,
             const std::string& per_sample_path,
             std::optional<double> theta_flag,
             const std::string& comparison_flag) {
  const PipelineConfig cfg = effective_config(global);
  MatchPolicy policy{
      theta_flag.value_or(cfg.scoring.theta),
      MatchPolicy::comparison_from_string(
          comparison_flag.empty() ? cfg.scoring.comparison : comparison_flag)};
  policy.validate();

  const std::vector<SamplePrediction> preds =
      load_predictions(pred_path, cfg.format);
  std::vector<SamplePrediction> golds;
  for (const Sample& s : load_samples(gold_path)) {
    try {
      golds.push_back(SamplePrediction{s.id, parse_quadruplets(s.output, cfg.format)});
    } catch (const MalformedAnnotation& e) {
      throw MalformedAnnotation(gold_path + ": sample " + std::to_string(s.id) +
                                ": " + e.what());
    }
  }

  std::vector<SampleScore> per_sample;
  const EvalReport report = score_dataset(
      preds, golds, policy, per_sample_path.empty() ? nullptr : &per_sample);

  auto counts_json = [](const MatchCounts& c) {
    return json{{"tp", c.tp},           {"pred", c.pred_total},
                {"gold", c.gold_total}, {"precision", c.precision()},
                {"recall", c.recall()}, {"f1", c.f1()}};
  };
  const json summary{{"hard", counts_json(report.hard)},
                     {"soft", counts_json(report.soft)},
                     {"average", report.average()}};
  if (!report_path.empty()) {
    write_text(report_path, summary.dump(2) + "\n");
  }
  if (!per_sample_path.empty()) {
    std::ofstream out(per_sample_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot write per-sample scores: " + per_sample_path);
    }
    for (const SampleScore& row : per_sample) {
      out << json{{"id", row.id},
                  {"pred_count", row.pred_count},
                  {"gold_count", row.gold_count},
                  {"hard_tp", row.hard_tp},
                  {"soft_tp", row.soft_tp}}
              .dump()
          << "\n";
    }
  }

  char line[160];
  std::snprintf(line, sizeof(line),
                "hard  P %.2f  R %.2f  F1 %.2f\n"
                "soft  P %.2f  R %.2f  F1 %.2f\n"
                "average %.4f\n",
                report.hard.precision(), report.hard.recall(), report.hard.f1(),
                report.soft.precision(), report.soft.recall(), report.soft.f1(),
                report.average());
  std::cout << line;
  return 0;
}

int run_sweep(const GlobalOpts& global, const std::string& votes_path,
              const std::string& gold_path, const std::string& out_path,
              const std::vector<int>& taus_flag,
              const std::string& predictions_dir) {
  const PipelineConfig cfg = effective_config(global);
  const VotesLog votes = read_votes(votes_path);
  const std::vector<int> taus =
      taus_flag.empty() ? default_tau_grid(votes.meta.tau) : taus_flag;
  const std::vector<Sample> gold = load_samples(gold_path);
  const MatchPolicy policy{
      cfg.scoring.theta,
      MatchPolicy::comparison_from_string(cfg.scoring.comparison)};

  if (!predictions_dir.empty()) {
    std::filesystem::create_directories(predictions_dir);
  }
  const std::vector<SweepRow> rows =
      sweep_from_votes(votes, gold, TrRule{cfg.tr.non_hate_group}, cfg.format,
                       policy, taus, predictions_dir);
  const std::string csv = format_sweep_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    write_text(out_path, csv);
    std::cerr << "sweep: wrote " << rows.size() << " rows to " << out_path
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-retrieval-augmented generation with multi-round "
               "accumulative voting for quadruplet extraction"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts global;
  app.add_option("--config", global.config_path, "pipeline config file");
  app.add_option("--seed", global.seed, "override [runtime] seed");
  app.add_flag("--no-tr", global.toggles.no_tr,
               "run the original quadruplet task (skip reformulation)");
  app.add_flag("--no-srag", global.toggles.no_srag,
               "zero-shot prompts instead of retrieved examples");
  app.add_flag("--no-mav", global.toggles.no_mav,
               "single generation instead of voting");
  app.add_flag("--record-votes", global.toggles.record_votes,
               "write per-round vote multisets next to inference outputs");

  std::string in_path, out_path, report_path, on_violation;
  auto* transform = app.add_subcommand(
      "transform", "rewrite quadruplet annotations as triplets");
  transform->add_option("--in", in_path, "quadruplet dataset")->required();
  transform->add_option("--out", out_path, "triplet dataset")->required();
  transform->add_option("--report", report_path, "violation report JSON");
  transform->add_option("--on-violation", on_violation,
                        "skip or abort (default from config)");

  std::string embed_in, embed_out;
  auto* embed = app.add_subcommand("embed", "embed dataset contents");
  embed->add_option("--in", embed_in, "dataset")->required();
  embed->add_option("--out", embed_out, "vector file")->required();

  std::string index_vectors, index_out, index_dataset;
  auto* index = app.add_subcommand("index", "normalize vectors into an index");
  index->add_option("--vectors", index_vectors, "vector file")->required();
  index->add_option("--out", index_out, "index file")->required();
  index->add_option("--dataset", index_dataset,
                    "cross-check ids against this dataset");

  std::string prep_train, prep_index, prep_out, prep_layout = "pairs";
  auto* prep = app.add_subcommand("prep-train",
                                  "build retrieval-augmented training pairs");
  prep->add_option("--train", prep_train, "training dataset")->required();
  prep->add_option("--index", prep_index, "index over the training dataset");
  prep->add_option("--out", prep_out, "pairs JSONL")->required();
  prep->add_option("--layout", prep_layout, "pairs or chat");

  std::string infer_train, infer_index, infer_test, infer_test_vectors,
      infer_out_dir = ".";
  auto* infer = app.add_subcommand("infer", "run the inference pipeline");
  infer->add_option("--train", infer_train, "retrieval corpus")->required();
  infer->add_option("--index", infer_index, "index over the corpus")->required();
  infer->add_option("--test", infer_test, "test dataset")->required();
  infer->add_option("--test-vectors", infer_test_vectors,
                    "precomputed test vectors (else embed via backend)");
  infer->add_option("--out-dir", infer_out_dir, "output directory");

  std::string eval_pred, eval_gold, eval_report, eval_per_sample,
      eval_comparison;
  std::optional<double> eval_theta;
  auto* eval = app.add_subcommand("eval", "score predictions against gold");
  eval->add_option("--pred", eval_pred, "predictions JSONL")->required();
  eval->add_option("--gold", eval_gold, "gold dataset")->required();
  eval->add_option("--report", eval_report, "report JSON path");
  eval->add_option("--per-sample", eval_per_sample, "per-sample scores JSONL");
  eval->add_option("--theta", eval_theta, "similarity threshold override");
  eval->add_option("--comparison", eval_comparison, "strict_gt or gte");

  std::string sweep_votes, sweep_gold, sweep_out, sweep_pred_dir;
  std::vector<int> sweep_taus;
  auto* sweep = app.add_subcommand("sweep",
                                   "replay recorded votes over thresholds");
  sweep->add_option("--votes", sweep_votes, "recorded votes JSONL")->required();
  sweep->add_option("--gold", sweep_gold, "gold dataset")->required();
  sweep->add_option("--out", sweep_out, "CSV path (default stdout)");
  sweep->add_option("--taus", sweep_taus, "thresholds to replay")
      ->delimiter(',');
  sweep->add_option("--predictions-dir", sweep_pred_dir,
                    "write per-threshold prediction files here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (transform->parsed()) {
      return run_transform(global, in_path, out_path, report_path, on_violation);
    }
    if (embed->parsed()) {
      return run_embed(global, embed_in, embed_out);
    }
    if (index->parsed()) {
      return run_index(global, index_vectors, index_out, index_dataset);
    }
    if (prep->parsed()) {
      return run_prep_train(global, prep_train, prep_index, prep_out,
                            prep_layout);
    }
    if (infer->parsed()) {
      return run_infer(global, infer_train, infer_index, infer_test,
                       infer_test_vectors, infer_out_dir);
    }
    if (eval->parsed()) {
      return run_eval(global, eval_pred, eval_gold, eval_report,
                      eval_per_sample, eval_theta, eval_comparison);
    }
    if (sweep->parsed()) {
      return run_sweep(global, sweep_votes, sweep_gold, sweep_out, sweep_taus,
                       sweep_pred_dir);
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", json{{"type", e.kind()}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", json{{"type", "internal"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  }
  return 0;
}
