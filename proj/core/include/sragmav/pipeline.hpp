#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sragmav/config.hpp"
#include "sragmav/dataset.hpp"
#include "sragmav/mav.hpp"
#include "sragmav/promptgen.hpp"
#include "sragmav/retrieval.hpp"
#include "sragmav/scoring.hpp"

namespace sragmav {

/// Ablation switches. no_tr runs the original quadruplet task end to end;
/// no_srag replaces retrieved examples with k copies of the zero-shot
/// prompt; no_mav takes a single generation instead of voting.
struct PipelineToggles {
  bool no_tr = false;
  bool no_srag = false;
  bool no_mav = false;
  bool record_votes = false;
};

struct SampleRun {
  std::int64_t id = 0;
  bool ok = false;
  std::string error_kind;  // when !ok
  std::string error;
  QuadrupletList quadruplets;  // empty when there is no usable winner
  MavOutcome outcome;
};

struct InferenceResult {
  std::vector<SampleRun> runs;  // test-set order
  Arity arity = Arity::triplet;
};

/// Full inference pass: prompts per sample (retrieval or zero-shot), voting
/// or single-shot generation, winner promoted back to quadruplets. Failures
/// are contained per sample. Worker count and voting parallelism come from
/// cfg.runtime; results are in test order regardless of either.
InferenceResult run_inference(const std::vector<Sample>& test,
                              const std::vector<Sample>& train,
                              const VectorIndex& index,
                              const std::vector<std::vector<float>>& test_vectors,
                              const PromptTemplate& tmpl,
                              const PipelineConfig& cfg,
                              const PipelineToggles& toggles,
                              GenerationBackend& backend);

/// Template from config when set, built-in default otherwise.
PromptTemplate resolve_template(const PipelineConfig& cfg, Arity arity);

/// Per-sample diagnostics JSONL: id, winner, quadruplets, rounds,
/// counts_top5, discarded, stopped_by (or an error object).
void write_results(const std::string& path, const InferenceResult& result,
                   const AnnotationFormat& fmt = {});

/// Prediction JSONL: {"id": ..., "output": "<quadruplet annotation or empty>"}.
void write_predictions(const std::string& path, const InferenceResult& result,
                       const AnnotationFormat& fmt = {});
std::vector<SamplePrediction> load_predictions(const std::string& path,
                                               const AnnotationFormat& fmt = {});

struct VotesMeta {
  int k = 0;
  int tau = 0;
  int max_rounds = 0;
  Arity arity = Arity::triplet;
  bool per_triplet = false;
  std::uint64_t seed = 0;
};

struct VoteRecord {
  std::int64_t id = 0;
  std::vector<RoundVotes> rounds;
  bool aborted = false;
};

struct VotesLog {
  VotesMeta meta;
  std::vector<VoteRecord> records;
};

VotesLog collect_votes(const InferenceResult& result, const VotesMeta& meta);
void write_votes(const std::string& path, const VotesLog& log);
VotesLog read_votes(const std::string& path);

struct SweepRow {
  int tau = 0;
  double hard = 0.0;
  double soft = 0.0;
  double average = 0.0;
};

/// Replays the recorded votes at each threshold and scores against gold.
/// Thresholds above meta.tau raise TauExceedsRecorded. When
/// `predictions_dir` is non-empty, writes predictions_tau_<t>.jsonl per
/// threshold in the same format as write_predictions.
std::vector<SweepRow> sweep_from_votes(const VotesLog& votes,
                                       const std::vector<Sample>& gold,
                                       const TrRule& rule,
                                       const AnnotationFormat& fmt,
                                       const MatchPolicy& policy,
                                       const std::vector<int>& taus,
                                       const std::string& predictions_dir = "");

/// "tau,hard,soft,average" header plus one row per threshold, scores with
/// four decimals.
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

/// The standard threshold grid, restricted to values <= recorded_tau.
std::vector<int> default_tau_grid(int recorded_tau);

}  // namespace sragmav
