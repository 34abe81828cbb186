#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sragmav/annotation.hpp"
#include "sragmav/dataset.hpp"

namespace sragmav {

/// The correlation that makes quadruplets collapsible to triplets: a record
/// is non-hateful exactly when its targeted group equals this token.
struct TrRule {
  std::string non_hate_group = "non-hate";
};

enum class ViolationPolicy { skip, abort };

ViolationPolicy violation_policy_from_string(std::string_view name);

/// Drops the hateful field. Throws RuleViolation when the label and the
/// group disagree (hateful record in the non-hate group or vice versa),
/// because the field would not be recoverable.
Triplet quad_to_triplet(const Quadruplet& q, const TrRule& rule);

/// Reinstates the hateful field from the group. Total: never throws.
Quadruplet triplet_to_quad(const Triplet& t, const TrRule& rule);

TripletList quads_to_triplets(const QuadrupletList& items, const TrRule& rule);
QuadrupletList triplets_to_quads(const TripletList& items, const TrRule& rule);

struct TransformViolation {
  std::int64_t sample_id = 0;
  std::string record;  // the offending quadruplet serialized on its own
  std::string reason;
};

struct TransformResult {
  std::vector<Sample> samples;                 // triplet outputs, input order
  std::vector<TransformViolation> violations;  // records skipped
  std::vector<std::int64_t> dropped_samples;   // ids left with zero records
};

/// Rewrites every sample's quadruplet annotation into the triplet form.
/// skip: offending records are dropped and reported; abort: first violation
/// rethrows with sample context. Ids, order, and content pass through.
TransformResult transform_dataset(const std::vector<Sample>& quads,
                                  const TrRule& rule,
                                  const AnnotationFormat& fmt = {},
                                  ViolationPolicy policy = ViolationPolicy::skip);

}  // namespace sragmav
