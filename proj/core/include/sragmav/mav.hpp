#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sragmav/annotation.hpp"
#include "sragmav/llmclient.hpp"
#include "sragmav/reformulate.hpp"

namespace sragmav {

struct MavConfig {
  int k = 10;           // generations per round (one per prompt)
  int tau = 200;        // accumulated-count stop threshold
  int max_rounds = 0;   // 0 -> ceil(4 * tau / k)
  double temperature = 0.1;
  int failure_budget = 0;  // consecutive transport failures before abort; 0 -> 3 * k
  bool per_triplet_voting = false;  // count each record separately
  Arity arity = Arity::triplet;
  AnnotationFormat format;     // tokens answers are canonicalized under
  bool record_rounds = false;  // keep per-round multisets for replay

  int effective_max_rounds() const;
  int effective_failure_budget() const;
  void validate() const;  // throws ConfigError
};

struct TallyEntry {
  int count = 0;
  int last_round = 0;  // round of the latest increment
};

struct VoteTally {
  std::map<std::string, TallyEntry> counts;  // canonical answer -> entry
  int rounds_run = 0;
  int discarded = 0;    // transport failures + unparseable generations
  int generations = 0;  // total backend calls attempted
};

enum class StopReason { threshold, max_rounds, aborted, single };

std::string_view to_string(StopReason reason);
StopReason stop_reason_from_string(std::string_view name);

/// One round's valid votes as a sorted (answer, count) multiset.
using RoundVotes = std::vector<std::pair<std::string, int>>;

struct MavOutcome {
  bool has_winner = false;
  std::string winner;  // canonical annotation string
  int winner_count = 0;
  StopReason stopped_by = StopReason::max_rounds;
  VoteTally tally;
  std::vector<RoundVotes> recorded_rounds;  // filled when record_rounds
};

/// Multi-round accumulative voting. Each round queries every prompt once,
/// folds the round's canonical answers into the tally in sorted order, and
/// stops at the first round boundary where the best count reaches tau.
/// Hitting max_rounds yields the plurality answer instead. Winner order:
/// count desc, earlier final-count round first, then lexicographic.
MavOutcome run_mav(const std::vector<std::string>& prompts,
                   const MavConfig& config, const GenParams& params,
                   GenerationBackend& backend, int max_in_flight = 1);

/// Re-runs the stopping rule over recorded rounds at a (new) threshold.
/// Pure: same rounds + same tau == same outcome as the live run.
MavOutcome replay_votes(const std::vector<RoundVotes>& rounds, int tau,
                        bool aborted = false);

/// Parses the winner and, for triplet arity, reinstates hatefulness.
/// Throws NoValidWinner when there is no winner to parse.
QuadrupletList winner_to_quadruplets(const MavOutcome& outcome,
                                     const TrRule& rule, Arity arity,
                                     const AnnotationFormat& fmt = {});

/// Voting disabled: one generation, parsed the same way. Equivalent to
/// run_mav with k=1, tau=1 on a deterministic backend. Throws NoValidWinner
/// when the single reply does not parse.
QuadrupletList run_single(const std::string& prompt, const GenParams& params,
                          GenerationBackend& backend, const TrRule& rule,
                          Arity arity, const AnnotationFormat& fmt = {});

}  // namespace sragmav
