#include "sragmav/scoring.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "sragmav/errors.hpp"
#include "sragmav/text.hpp"

namespace sragmav {

namespace {

std::size_t lcs_length(const std::vector<char32_t>& a,
                       const std::vector<char32_t>& b) {
  if (a.empty() || b.empty()) {
    return 0;
  }
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

bool meta_fields_equal(const Quadruplet& pred, const Quadruplet& gold) {
  return pred.hateful == gold.hateful &&
         collapse_whitespace(pred.targeted_group) ==
             collapse_whitespace(gold.targeted_group);
}

template <typename Matcher>
long greedy_tp(const QuadrupletList& preds, const QuadrupletList& golds,
               Matcher&& matches) {
  std::vector<char> used(golds.size(), 0);
  long tp = 0;
  for (const Quadruplet& pred : preds) {
    for (std::size_t j = 0; j < golds.size(); ++j) {
      if (!used[j] && matches(pred, golds[j])) {
        used[j] = 1;
        ++tp;
        break;
      }
    }
  }
  return tp;
}

}  // namespace

double similarity(std::string_view a, std::string_view b) {
  const std::vector<char32_t> ca = decode_utf8(trim(a));
  const std::vector<char32_t> cb = decode_utf8(trim(b));
  if (ca.empty() && cb.empty()) {
    return 1.0;
  }
  return 2.0 * static_cast<double>(lcs_length(ca, cb)) /
         static_cast<double>(ca.size() + cb.size());
}

bool MatchPolicy::passes(double sim) const noexcept {
  return comparison == Comparison::strict_gt ? sim > theta : sim >= theta;
}

void MatchPolicy::validate() const {
  if (!(theta > 0.0) || !(theta <= 1.0)) {
    throw ConfigError("theta must be in (0, 1]");
  }
}

MatchPolicy::Comparison MatchPolicy::comparison_from_string(
    std::string_view name) {
  if (name == "strict_gt") {
    return Comparison::strict_gt;
  }
  if (name == "gte") {
    return Comparison::gte;
  }
  throw ConfigError("unknown comparison \"" + std::string(name) +
                    "\" (expected strict_gt or gte)");
}

bool hard_match(const Quadruplet& pred, const Quadruplet& gold) {
  return meta_fields_equal(pred, gold) &&
         trim(pred.target) == trim(gold.target) &&
         trim(pred.argument) == trim(gold.argument);
}

bool soft_match(const Quadruplet& pred, const Quadruplet& gold,
                const MatchPolicy& policy) {
  return meta_fields_equal(pred, gold) &&
         policy.passes(similarity(pred.target, gold.target)) &&
         policy.passes(similarity(pred.argument, gold.argument));
}

double MatchCounts::precision() const noexcept {
  return pred_total == 0 ? 0.0
                         : 100.0 * static_cast<double>(tp) /
                               static_cast<double>(pred_total);
}

double MatchCounts::recall() const noexcept {
  return gold_total == 0 ? 0.0
                         : 100.0 * static_cast<double>(tp) /
                               static_cast<double>(gold_total);
}

double MatchCounts::f1() const noexcept {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double average_score(double hard_f1, double soft_f1) noexcept {
  return (hard_f1 + soft_f1) / 2.0;
}

EvalReport score_dataset(const std::vector<SamplePrediction>& preds,
                         const std::vector<SamplePrediction>& golds,
                         const MatchPolicy& policy,
                         std::vector<SampleScore>* per_sample) {
  policy.validate();

  std::unordered_map<std::int64_t, const QuadrupletList*> pred_of;
  pred_of.reserve(preds.size());
  for (const SamplePrediction& p : preds) {
    if (!pred_of.emplace(p.id, &p.items).second) {
      throw IdMismatch("prediction id " + std::to_string(p.id) +
                       " appears more than once");
    }
  }
  std::unordered_set<std::int64_t> gold_ids;
  gold_ids.reserve(golds.size());
  for (const SamplePrediction& g : golds) {
    if (!gold_ids.insert(g.id).second) {
      throw IdMismatch("gold id " + std::to_string(g.id) +
                       " appears more than once");
    }
  }
  for (const SamplePrediction& p : preds) {
    if (!gold_ids.contains(p.id)) {
      throw IdMismatch("prediction id " + std::to_string(p.id) +
                       " has no gold sample");
    }
  }

  static const QuadrupletList kEmpty;
  EvalReport report;
  for (const SamplePrediction& gold : golds) {
    auto it = pred_of.find(gold.id);
    const QuadrupletList& pred = it == pred_of.end() ? kEmpty : *it->second;

    const long hard_tp = greedy_tp(pred, gold.items, hard_match);
    const long soft_tp =
        greedy_tp(pred, gold.items, [&](const Quadruplet& a, const Quadruplet& b) {
          return soft_match(a, b, policy);
        });

    report.hard.tp += hard_tp;
    report.hard.pred_total += static_cast<long>(pred.size());
    report.hard.gold_total += static_cast<long>(gold.items.size());
    report.soft.tp += soft_tp;
    report.soft.pred_total += static_cast<long>(pred.size());
    report.soft.gold_total += static_cast<long>(gold.items.size());

    if (per_sample != nullptr) {
      per_sample->push_back(SampleScore{gold.id,
                                        static_cast<long>(pred.size()),
                                        static_cast<long>(gold.items.size()),
                                        hard_tp, soft_tp});
    }
  }
  return report;
}

}  // namespace sragmav
