#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sragmav/annotation.hpp"

namespace sragmav {

/// Longest-common-subsequence similarity over Unicode code points:
/// 2 * LCS(a, b) / (|a| + |b|). Two empty strings are identical (1.0).
double similarity(std::string_view a, std::string_view b);

/// Span-similarity acceptance rule for soft matching.
struct MatchPolicy {
  enum class Comparison { strict_gt, gte };

  double theta = 0.5;
  Comparison comparison = Comparison::strict_gt;

  bool passes(double sim) const noexcept;
  void validate() const;  // throws ConfigError

  static Comparison comparison_from_string(std::string_view name);
};

/// All four fields equal, text fields compared after trimming and the group
/// after whitespace collapsing.
bool hard_match(const Quadruplet& pred, const Quadruplet& gold);

/// Group and hatefulness equal, target and argument each pass the
/// similarity policy.
bool soft_match(const Quadruplet& pred, const Quadruplet& gold,
                const MatchPolicy& policy);

/// Micro counts; precision/recall/f1 are percentages.
struct MatchCounts {
  long tp = 0;
  long pred_total = 0;
  long gold_total = 0;

  double precision() const noexcept;
  double recall() const noexcept;
  double f1() const noexcept;
};

/// Mean of two F1 percentages. Kept as its own function so reported table
/// averages can be reproduced from published F1 numbers exactly.
double average_score(double hard_f1, double soft_f1) noexcept;

struct EvalReport {
  MatchCounts hard;
  MatchCounts soft;

  double average() const noexcept { return average_score(hard.f1(), soft.f1()); }
};

struct SamplePrediction {
  std::int64_t id = 0;
  QuadrupletList items;
};

struct SampleScore {
  std::int64_t id = 0;
  long pred_count = 0;
  long gold_count = 0;
  long hard_tp = 0;
  long soft_tp = 0;
};

/// Micro-F1 over all samples with greedy first-fit matching per sample and
/// per matcher: predictions in order, each taking the first unmatched gold
/// it matches. Gold ids define the universe; prediction ids must be a subset
/// (IdMismatch otherwise), missing predictions count as empty. Sample order
/// never changes totals. `per_sample`, when given, receives one row per gold
/// sample in gold order.
EvalReport score_dataset(const std::vector<SamplePrediction>& preds,
                         const std::vector<SamplePrediction>& golds,
                         const MatchPolicy& policy = {},
                         std::vector<SampleScore>* per_sample = nullptr);

}  // namespace sragmav
