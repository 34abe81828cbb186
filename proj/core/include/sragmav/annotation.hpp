#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sragmav/errors.hpp"

namespace sragmav {

enum class Hateful { hate, non_hate };

/// Whether an annotation string carries (target, argument, group) records
/// or (target, argument, group, hateful) records.
enum class Arity { triplet, quadruplet };

/// Wire-format tokens for annotation strings. Defaults give
/// "T | A | G | hate [SEP] ... [END]".
struct AnnotationFormat {
  std::string field_delimiter = " | ";
  std::string record_separator = "[SEP]";
  std::string terminator = "[END]";
  std::string hate_token = "hate";
  std::string non_hate_token = "non-hate";

  /// The delimiter with surrounding whitespace removed; fields are split on
  /// this, which is what makes parsing spacing-insensitive.
  std::string field_delimiter_core() const;

  void validate() const;  // throws ConfigError
};

/// Sentinel vote key for generations that do not parse. Never a valid
/// canonical string because it contains no terminator.
inline constexpr std::string_view kInvalidAnswerKey = "<INVALID>";

struct Triplet {
  std::string target;
  std::string argument;
  std::string targeted_group;

  bool operator==(const Triplet&) const = default;
};

struct Quadruplet {
  std::string target;
  std::string argument;
  std::string targeted_group;
  Hateful hateful = Hateful::hate;

  bool operator==(const Quadruplet&) const = default;
};

using TripletList = std::vector<Triplet>;
using QuadrupletList = std::vector<Quadruplet>;

const std::string& to_token(Hateful h, const AnnotationFormat& fmt);
Hateful hateful_from_token(std::string_view token, const AnnotationFormat& fmt);

/// Parse an annotation string. Throws MalformedAnnotation when the field
/// count is wrong for the arity, a mandatory field is empty, the hateful
/// token is unknown, the terminator is missing, or non-whitespace content
/// follows the terminator. Fields are trimmed; targeted_group additionally
/// has internal whitespace runs collapsed.
TripletList parse_triplets(std::string_view raw, const AnnotationFormat& fmt = {});
QuadrupletList parse_quadruplets(std::string_view raw, const AnnotationFormat& fmt = {});

/// Render the canonical annotation string. Lists must be non-empty.
std::string serialize(const TripletList& items, const AnnotationFormat& fmt = {});
std::string serialize(const QuadrupletList& items, const AnnotationFormat& fmt = {});

/// parse-then-serialize; unparseable input maps to kInvalidAnswerKey.
/// Idempotent, and collapses spacing variants of the same records.
std::string canonicalize_answer(std::string_view raw, Arity arity,
                                const AnnotationFormat& fmt = {});

}  // namespace sragmav
