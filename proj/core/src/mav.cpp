#include "sragmav/mav.hpp"

#include <stdexcept>

namespace sragmav {

namespace {

/// Tally shared by the live run and replay; both fold whole rounds in
/// sorted-answer order and pick winners the same way, which is what makes
/// replay bit-identical to the run that recorded the votes.
class Accumulator {
 public:
  void add_round(const std::map<std::string, int>& round_counts) {
    ++round_;
    for (const auto& [answer, count] : round_counts) {
      TallyEntry& entry = tally_[answer];
      entry.count += count;
      entry.last_round = round_;
    }
  }

  int rounds() const noexcept { return round_; }
  const std::map<std::string, TallyEntry>& counts() const noexcept {
    return tally_;
  }

  /// count desc, earlier final-count round first, then lexicographic
  /// (ascending map order supplies the lexicographic leg).
  const std::pair<const std::string, TallyEntry>* best() const {
    const std::pair<const std::string, TallyEntry>* winner = nullptr;
    for (const auto& entry : tally_) {
      if (winner == nullptr || entry.second.count > winner->second.count ||
          (entry.second.count == winner->second.count &&
           entry.second.last_round < winner->second.last_round)) {
        winner = &entry;
      }
    }
    return winner;
  }

 private:
  std::map<std::string, TallyEntry> tally_;
  int round_ = 0;
};

MavOutcome finalize(Accumulator& acc, StopReason reason) {
  MavOutcome outcome;
  outcome.stopped_by = reason;
  outcome.tally.counts = acc.counts();
  outcome.tally.rounds_run = acc.rounds();
  if (const auto* winner = acc.best()) {
    outcome.has_winner = true;
    outcome.winner = winner->first;
    outcome.winner_count = winner->second.count;
  }
  return outcome;
}

/// Canonical vote keys for one generation. Whole-answer voting yields one
/// key; per-record voting yields one key per parsed record. Unparseable
/// text yields the single invalid sentinel.
std::vector<std::string> vote_keys(const std::string& text,
                                   const MavConfig& config) {
  if (!config.per_triplet_voting) {
    return {canonicalize_answer(text, config.arity, config.format)};
  }
  try {
    std::vector<std::string> keys;
    if (config.arity == Arity::triplet) {
      for (const Triplet& t : parse_triplets(text, config.format)) {
        keys.push_back(serialize(TripletList{t}, config.format));
      }
    } else {
      for (const Quadruplet& q : parse_quadruplets(text, config.format)) {
        keys.push_back(serialize(QuadrupletList{q}, config.format));
      }
    }
    return keys;
  } catch (const MalformedAnnotation&) {
    return {std::string(kInvalidAnswerKey)};
  }
}

}  // namespace

int MavConfig::effective_max_rounds() const {
  if (max_rounds > 0) {
    return max_rounds;
  }
  return (4 * tau + k - 1) / k;
}

int MavConfig::effective_failure_budget() const {
  return failure_budget > 0 ? failure_budget : 3 * k;
}

void MavConfig::validate() const {
  if (k < 1) {
    throw ConfigError("mav k must be >= 1");
  }
  if (tau < 1) {
    throw ConfigError("mav tau must be >= 1");
  }
  if (max_rounds < 0) {
    throw ConfigError("mav max_rounds must be >= 0");
  }
  if (failure_budget < 0) {
    throw ConfigError("mav failure_budget must be >= 0");
  }
  if (!(temperature >= 0.0)) {
    throw ConfigError("mav temperature must be >= 0");
  }
  if (static_cast<long>(effective_max_rounds()) * k < tau) {
    throw ConfigError("mav cannot stop: max_rounds * k = " +
                      std::to_string(static_cast<long>(effective_max_rounds()) * k) +
                      " < tau = " + std::to_string(tau));
  }
  format.validate();
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::threshold:
      return "threshold";
    case StopReason::max_rounds:
      return "max_rounds";
    case StopReason::aborted:
      return "aborted";
    case StopReason::single:
      return "single";
  }
  return "unknown";
}

StopReason stop_reason_from_string(std::string_view name) {
  if (name == "threshold") {
    return StopReason::threshold;
  }
  if (name == "max_rounds") {
    return StopReason::max_rounds;
  }
  if (name == "aborted") {
    return StopReason::aborted;
  }
  if (name == "single") {
    return StopReason::single;
  }
  throw ConfigError("unknown stop reason \"" + std::string(name) + "\"");
}

MavOutcome run_mav(const std::vector<std::string>& prompts,
                   const MavConfig& config, const GenParams& params,
                   GenerationBackend& backend, int max_in_flight) {
  config.validate();
  if (prompts.empty()) {
    throw std::invalid_argument("run_mav needs at least one prompt");
  }
  GenParams round_params = params;
  round_params.temperature = config.temperature;

  const int max_rounds = config.effective_max_rounds();
  const int failure_budget = config.effective_failure_budget();

  Accumulator acc;
  MavOutcome outcome;
  int discarded = 0;
  int generations = 0;
  int consecutive_failures = 0;
  bool aborted = false;

  for (int round = 1; round <= max_rounds; ++round) {
    const auto batch = generate_batch(prompts, round_params, backend,
                                      max_in_flight);
    std::map<std::string, int> round_counts;
    for (const BatchItem& item : batch) {  // index order: deterministic
      ++generations;
      if (!item.ok) {
        ++discarded;
        if (++consecutive_failures >= failure_budget) {
          aborted = true;
        }
        continue;
      }
      consecutive_failures = 0;  // the backend answered; streak is transport-only
      for (const std::string& key : vote_keys(item.text, config)) {
        if (key == kInvalidAnswerKey) {
          ++discarded;
        } else {
          ++round_counts[key];
        }
      }
    }
    acc.add_round(round_counts);
    if (config.record_rounds) {
      outcome.recorded_rounds.emplace_back(round_counts.begin(),
                                           round_counts.end());
    }
    if (!config.per_triplet_voting) {
      int tallied = 0;
      for (const auto& [answer, entry] : acc.counts()) {
        tallied += entry.count;
      }
      if (tallied + discarded != generations) {
        throw std::logic_error("vote accounting broke: " +
                               std::to_string(tallied) + " + " +
                               std::to_string(discarded) +
                               " != " + std::to_string(generations));
      }
    }

    const auto* best = acc.best();
    if (best != nullptr && best->second.count >= config.tau) {
      MavOutcome result = finalize(acc, StopReason::threshold);
      result.tally.discarded = discarded;
      result.tally.generations = generations;
      result.recorded_rounds = std::move(outcome.recorded_rounds);
      return result;
    }
    if (aborted) {
      MavOutcome result = finalize(acc, StopReason::aborted);
      result.tally.discarded = discarded;
      result.tally.generations = generations;
      result.recorded_rounds = std::move(outcome.recorded_rounds);
      return result;
    }
  }

  MavOutcome result = finalize(acc, StopReason::max_rounds);
  result.tally.discarded = discarded;
  result.tally.generations = generations;
  result.recorded_rounds = std::move(outcome.recorded_rounds);
  return result;
}

MavOutcome replay_votes(const std::vector<RoundVotes>& rounds, int tau,
                        bool aborted) {
  if (tau < 1) {
    throw std::invalid_argument("replay requires tau >= 1");
  }
  Accumulator acc;
  for (const RoundVotes& round : rounds) {
    std::map<std::string, int> round_counts;
    for (const auto& [answer, count] : round) {
      round_counts[answer] += count;
    }
    acc.add_round(round_counts);
    const auto* best = acc.best();
    if (best != nullptr && best->second.count >= tau) {
      return finalize(acc, StopReason::threshold);
    }
  }
  return finalize(acc, aborted ? StopReason::aborted : StopReason::max_rounds);
}

QuadrupletList winner_to_quadruplets(const MavOutcome& outcome,
                                     const TrRule& rule, Arity arity,
                                     const AnnotationFormat& fmt) {
  if (!outcome.has_winner) {
    throw NoValidWinner("voting produced no parseable answer");
  }
  if (arity == Arity::quadruplet) {
    return parse_quadruplets(outcome.winner, fmt);
  }
  return triplets_to_quads(parse_triplets(outcome.winner, fmt), rule);
}

QuadrupletList run_single(const std::string& prompt, const GenParams& params,
                          GenerationBackend& backend, const TrRule& rule,
                          Arity arity, const AnnotationFormat& fmt) {
  const std::string text = backend.generate(prompt, params);
  try {
    if (arity == Arity::quadruplet) {
      return parse_quadruplets(text, fmt);
    }
    return triplets_to_quads(parse_triplets(text, fmt), rule);
  } catch (const MalformedAnnotation& e) {
    throw NoValidWinner(std::string("single generation did not parse: ") +
                        e.what());
  }
}

}  // namespace sragmav
