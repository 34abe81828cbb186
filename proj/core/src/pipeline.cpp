#include "sragmav/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sragmav/text.hpp"

namespace sragmav {

namespace {

using nlohmann::json;

std::string arity_name(Arity arity) {
  return arity == Arity::triplet ? "triplet" : "quadruplet";
}

Arity arity_from_name(std::string_view name) {
  if (name == "triplet") {
    return Arity::triplet;
  }
  if (name == "quadruplet") {
    return Arity::quadruplet;
  }
  throw ConfigError("unknown arity \"" + std::string(name) + "\"");
}

json quadruplets_to_json(const QuadrupletList& items,
                         const AnnotationFormat& fmt) {
  json rows = json::array();
  for (const Quadruplet& q : items) {
    rows.push_back(json::array(
        {q.target, q.argument, q.targeted_group, to_token(q.hateful, fmt)}));
  }
  return rows;
}

json top_counts_json(const VoteTally& tally, std::size_t limit) {
  std::vector<std::pair<std::string, TallyEntry>> entries(tally.counts.begin(),
                                                          tally.counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) {
      return a.second.count > b.second.count;
    }
    if (a.second.last_round != b.second.last_round) {
      return a.second.last_round < b.second.last_round;
    }
    return a.first < b.first;
  });
  if (entries.size() > limit) {
    entries.resize(limit);
  }
  json rows = json::array();
  for (const auto& [answer, entry] : entries) {
    rows.push_back(json::array({answer, entry.count}));
  }
  return rows;
}

void write_prediction_lines(
    const std::string& path,
    const std::vector<std::pair<std::int64_t, const QuadrupletList*>>& rows,
    const AnnotationFormat& fmt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write predictions: " + path);
  }
  for (const auto& [id, items] : rows) {
    json line{{"id", id},
              {"output", items->empty() ? std::string() : serialize(*items, fmt)}};
    out << line.dump() << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

MavConfig mav_config_for(const PipelineConfig& cfg,
                         const PipelineToggles& toggles, Arity arity) {
  MavConfig mav;
  mav.k = cfg.mav.k;
  mav.tau = cfg.mav.tau;
  mav.max_rounds = cfg.mav.max_rounds;
  mav.failure_budget = cfg.mav.failure_budget;
  mav.per_triplet_voting = cfg.mav.per_triplet_voting;
  mav.temperature = cfg.llm.temperature;
  mav.arity = arity;
  mav.format = cfg.format;
  mav.record_rounds = toggles.record_votes;
  return mav;
}

}  // namespace

PromptTemplate resolve_template(const PipelineConfig& cfg, Arity arity) {
  PromptTemplate tmpl = default_prompt_template(
      arity, cfg.format, TrRule{cfg.tr.non_hate_group},
      cfg.tmpl.include_example_answer);
  if (!cfg.tmpl.instruction.empty()) {
    tmpl.instruction = cfg.tmpl.instruction;
  }
  if (!cfg.tmpl.example_format.empty()) {
    tmpl.example_format = cfg.tmpl.example_format;
  }
  tmpl.validate();
  return tmpl;
}

InferenceResult run_inference(const std::vector<Sample>& test,
                              const std::vector<Sample>& train,
                              const VectorIndex& index,
                              const std::vector<std::vector<float>>& test_vectors,
                              const PromptTemplate& tmpl,
                              const PipelineConfig& cfg,
                              const PipelineToggles& toggles,
                              GenerationBackend& backend) {
  cfg.validate();
  if (toggles.record_votes && toggles.no_mav) {
    throw ConfigError("--record-votes needs voting; it cannot run with --no-mav");
  }
  const Arity arity = toggles.no_tr ? Arity::quadruplet : Arity::triplet;
  const TrRule rule{cfg.tr.non_hate_group};
  const MavConfig mav = mav_config_for(cfg, toggles, arity);
  const GenParams params{cfg.llm.temperature, cfg.llm.max_tokens, cfg.llm.stop};
  const int prompts_per_sample = toggles.no_mav ? 1 : mav.k;

  if (!toggles.no_srag && test_vectors.size() != test.size()) {
    throw DimMismatch("got " + std::to_string(test_vectors.size()) +
                      " test vectors for " + std::to_string(test.size()) +
                      " test samples");
  }
  PromptBuilder builder(index, train, tmpl, arity, cfg.format);

  InferenceResult result;
  result.arity = arity;
  result.runs.resize(test.size());

  auto process = [&](std::size_t i) {
    SampleRun& run = result.runs[i];
    run.id = test[i].id;
    try {
      std::vector<std::string> prompts;
      if (toggles.no_srag) {
        prompts.assign(static_cast<std::size_t>(prompts_per_sample),
                       builder.zero_shot_prompt(test[i].content));
      } else {
        prompts = builder.build_inference_prompts(
            test[i].content, test_vectors[i], prompts_per_sample);
      }
      if (toggles.no_mav) {
        run.outcome.stopped_by = StopReason::single;
        run.outcome.tally.rounds_run = 1;
        run.outcome.tally.generations = 1;
        try {
          run.quadruplets =
              run_single(prompts[0], params, backend, rule, arity, cfg.format);
          run.outcome.has_winner = true;
          run.outcome.winner =
              arity == Arity::quadruplet
                  ? serialize(run.quadruplets, cfg.format)
                  : serialize(quads_to_triplets(run.quadruplets, rule),
                              cfg.format);
          run.outcome.winner_count = 1;
          run.outcome.tally.counts[run.outcome.winner] = TallyEntry{1, 1};
        } catch (const NoValidWinner&) {
          run.outcome.tally.discarded = 1;
        }
      } else {
        run.outcome =
            run_mav(prompts, mav, params, backend, cfg.runtime.max_in_flight);
        try {
          run.quadruplets =
              winner_to_quadruplets(run.outcome, rule, arity, cfg.format);
        } catch (const NoValidWinner&) {
          // empty prediction; the vote record still surfaces what happened
        }
      }
      run.ok = true;
    } catch (const Error& e) {
      run.ok = false;
      run.error_kind = e.kind();
      run.error = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(1, cfg.runtime.workers)), test.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      process(i);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= result.runs.size()) {
            return;
          }
          process(i);
        }
      });
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  return result;
}

void write_results(const std::string& path, const InferenceResult& result,
                   const AnnotationFormat& fmt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write results: " + path);
  }
  for (const SampleRun& run : result.runs) {
    json line;
    if (!run.ok) {
      line = json{{"id", run.id},
                  {"error", json{{"type", run.error_kind}, {"message", run.error}}}};
    } else {
      line = json{{"id", run.id},
                  {"winner", run.outcome.has_winner ? run.outcome.winner : ""},
                  {"quadruplets", quadruplets_to_json(run.quadruplets, fmt)},
                  {"rounds", run.outcome.tally.rounds_run},
                  {"counts_top5", top_counts_json(run.outcome.tally, 5)},
                  {"discarded", run.outcome.tally.discarded},
                  {"stopped_by", std::string(to_string(run.outcome.stopped_by))}};
    }
    out << line.dump() << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

void write_predictions(const std::string& path, const InferenceResult& result,
                       const AnnotationFormat& fmt) {
  std::vector<std::pair<std::int64_t, const QuadrupletList*>> rows;
  rows.reserve(result.runs.size());
  for (const SampleRun& run : result.runs) {
    rows.emplace_back(run.id, &run.quadruplets);
  }
  write_prediction_lines(path, rows, fmt);
}

std::vector<SamplePrediction> load_predictions(const std::string& path,
                                               const AnnotationFormat& fmt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open predictions: " + path);
  }
  std::vector<SamplePrediction> preds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(where + ": " + e.what());
    }
    if (!row.contains("id") || !row["id"].is_number_integer() ||
        !row.contains("output") || !row["output"].is_string()) {
      throw InvalidRecord(where + ": expected {\"id\": int, \"output\": string}");
    }
    SamplePrediction pred;
    pred.id = row["id"].get<std::int64_t>();
    const std::string output = row["output"].get<std::string>();
    if (!output.empty()) {
      try {
        pred.items = parse_quadruplets(output, fmt);
      } catch (const MalformedAnnotation& e) {
        throw MalformedAnnotation(where + ": " + e.what());
      }
    }
    preds.push_back(std::move(pred));
  }
  return preds;
}

VotesLog collect_votes(const InferenceResult& result, const VotesMeta& meta) {
  VotesLog log;
  log.meta = meta;
  log.records.reserve(result.runs.size());
  for (const SampleRun& run : result.runs) {
    log.records.push_back(VoteRecord{
        run.id, run.outcome.recorded_rounds,
        run.outcome.stopped_by == StopReason::aborted});
  }
  return log;
}

void write_votes(const std::string& path, const VotesLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write votes: " + path);
  }
  out << json{{"meta", json{{"k", log.meta.k},
                            {"tau", log.meta.tau},
                            {"max_rounds", log.meta.max_rounds},
                            {"arity", arity_name(log.meta.arity)},
                            {"per_triplet", log.meta.per_triplet},
                            {"seed", log.meta.seed}}}}
          .dump()
      << "\n";
  for (const VoteRecord& record : log.records) {
    json rounds = json::array();
    for (const RoundVotes& round : record.rounds) {
      json votes = json::array();
      for (const auto& [answer, count] : round) {
        votes.push_back(json::array({answer, count}));
      }
      rounds.push_back(std::move(votes));
    }
    out << json{{"id", record.id},
                {"aborted", record.aborted},
                {"rounds", std::move(rounds)}}
            .dump()
        << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

VotesLog read_votes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open votes: " + path);
  }
  VotesLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(where + ": " + e.what());
    }
    if (!have_meta) {
      if (!row.contains("meta")) {
        throw InvalidRecord(where + ": first line must carry the meta object");
      }
      const json& meta = row["meta"];
      log.meta.k = meta.at("k").get<int>();
      log.meta.tau = meta.at("tau").get<int>();
      log.meta.max_rounds = meta.at("max_rounds").get<int>();
      log.meta.arity = arity_from_name(meta.at("arity").get<std::string>());
      log.meta.per_triplet = meta.at("per_triplet").get<bool>();
      log.meta.seed = meta.at("seed").get<std::uint64_t>();
      have_meta = true;
      continue;
    }
    if (!row.contains("id") || !row.contains("rounds")) {
      throw InvalidRecord(where + ": expected id + rounds");
    }
    VoteRecord record;
    record.id = row["id"].get<std::int64_t>();
    record.aborted = row.value("aborted", false);
    for (const json& round : row["rounds"]) {
      RoundVotes votes;
      for (const json& vote : round) {
        if (!vote.is_array() || vote.size() != 2) {
          throw InvalidRecord(where + ": votes must be [answer, count] pairs");
        }
        votes.emplace_back(vote[0].get<std::string>(), vote[1].get<int>());
      }
      record.rounds.push_back(std::move(votes));
    }
    log.records.push_back(std::move(record));
  }
  if (!have_meta) {
    throw InvalidRecord(path + ": votes file has no meta line");
  }
  return log;
}

std::vector<SweepRow> sweep_from_votes(const VotesLog& votes,
                                       const std::vector<Sample>& gold,
                                       const TrRule& rule,
                                       const AnnotationFormat& fmt,
                                       const MatchPolicy& policy,
                                       const std::vector<int>& taus,
                                       const std::string& predictions_dir) {
  for (int tau : taus) {
    if (tau < 1) {
      throw std::invalid_argument("sweep thresholds must be >= 1");
    }
    if (tau > votes.meta.tau) {
      throw TauExceedsRecorded(
          "tau " + std::to_string(tau) + " exceeds the recorded run's tau " +
          std::to_string(votes.meta.tau) +
          "; votes beyond the recorded threshold were never generated");
    }
  }

  std::vector<SamplePrediction> golds;
  golds.reserve(gold.size());
  for (const Sample& s : gold) {
    golds.push_back(SamplePrediction{s.id, parse_quadruplets(s.output, fmt)});
  }

  std::vector<SweepRow> rows;
  rows.reserve(taus.size());
  for (int tau : taus) {
    std::vector<SamplePrediction> preds;
    preds.reserve(votes.records.size());
    std::vector<std::pair<std::int64_t, const QuadrupletList*>> lines;
    lines.reserve(votes.records.size());
    for (const VoteRecord& record : votes.records) {
      const MavOutcome outcome =
          replay_votes(record.rounds, tau, record.aborted);
      SamplePrediction pred{record.id, {}};
      if (outcome.has_winner) {
        pred.items =
            winner_to_quadruplets(outcome, rule, votes.meta.arity, fmt);
      }
      preds.push_back(std::move(pred));
    }
    if (!predictions_dir.empty()) {
      for (const SamplePrediction& pred : preds) {
        lines.emplace_back(pred.id, &pred.items);
      }
      write_prediction_lines(predictions_dir + "/predictions_tau_" +
                                 std::to_string(tau) + ".jsonl",
                             lines, fmt);
    }
    const EvalReport report = score_dataset(preds, golds, policy);
    rows.push_back(
        SweepRow{tau, report.hard.f1(), report.soft.f1(), report.average()});
  }
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "tau,hard,soft,average\n";
  char buf[128];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.4f,%.4f,%.4f\n", row.tau, row.hard,
                  row.soft, row.average);
    out += buf;
  }
  return out;
}

std::vector<int> default_tau_grid(int recorded_tau) {
  static const int kGrid[] = {1, 2, 3, 5, 8, 10, 15, 20, 30, 40, 50, 80, 100, 200};
  std::vector<int> taus;
  for (int tau : kGrid) {
    if (tau <= recorded_tau) {
      taus.push_back(tau);
    }
  }
  return taus;
}

}  // namespace sragmav
