#include "sragmav/reformulate.hpp"

namespace sragmav {

ViolationPolicy violation_policy_from_string(std::string_view name) {
  if (name == "skip") {
    return ViolationPolicy::skip;
  }
  if (name == "abort") {
    return ViolationPolicy::abort;
  }
  throw ConfigError("unknown violation policy \"" + std::string(name) +
                    "\" (expected skip or abort)");
}

Triplet quad_to_triplet(const Quadruplet& q, const TrRule& rule) {
  const bool group_says_non_hate = q.targeted_group == rule.non_hate_group;
  const bool label_says_non_hate = q.hateful == Hateful::non_hate;
  if (group_says_non_hate != label_says_non_hate) {
    throw RuleViolation(
        "hatefulness label contradicts targeted group \"" + q.targeted_group +
        "\"; the label would not be recoverable from the triplet");
  }
  return Triplet{q.target, q.argument, q.targeted_group};
}

Quadruplet triplet_to_quad(const Triplet& t, const TrRule& rule) {
  const Hateful h = t.targeted_group == rule.non_hate_group
                        ? Hateful::non_hate
                        : Hateful::hate;
  return Quadruplet{t.target, t.argument, t.targeted_group, h};
}

TripletList quads_to_triplets(const QuadrupletList& items, const TrRule& rule) {
  TripletList out;
  out.reserve(items.size());
  for (const Quadruplet& q : items) {
    out.push_back(quad_to_triplet(q, rule));
  }
  return out;
}

QuadrupletList triplets_to_quads(const TripletList& items, const TrRule& rule) {
  QuadrupletList out;
  out.reserve(items.size());
  for (const Triplet& t : items) {
    out.push_back(triplet_to_quad(t, rule));
  }
  return out;
}

TransformResult transform_dataset(const std::vector<Sample>& quads,
                                  const TrRule& rule,
                                  const AnnotationFormat& fmt,
                                  ViolationPolicy policy) {
  TransformResult result;
  result.samples.reserve(quads.size());
  for (const Sample& sample : quads) {
    QuadrupletList records;
    try {
      records = parse_quadruplets(sample.output, fmt);
    } catch (const MalformedAnnotation& e) {
      throw MalformedAnnotation("sample " + std::to_string(sample.id) + ": " +
                                e.what());
    }
    TripletList kept;
    for (const Quadruplet& q : records) {
      try {
        kept.push_back(quad_to_triplet(q, rule));
      } catch (const RuleViolation& e) {
        if (policy == ViolationPolicy::abort) {
          throw RuleViolation("sample " + std::to_string(sample.id) + ": " +
                              e.what());
        }
        result.violations.push_back(TransformViolation{
            sample.id, serialize(QuadrupletList{q}, fmt), e.what()});
      }
    }
    if (kept.empty()) {
      result.dropped_samples.push_back(sample.id);
      continue;
    }
    result.samples.push_back(
        Sample{sample.id, sample.content, serialize(kept, fmt)});
  }
  return result;
}

}  // namespace sragmav
