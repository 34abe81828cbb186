#include "sragmav/annotation.hpp"

#include <stdexcept>

#include "sragmav/text.hpp"

namespace sragmav {

namespace {

std::vector<std::string_view> split_on(std::string_view text,
                                       std::string_view sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = text.find(sep, pos);
    if (hit == std::string_view::npos) {
      parts.push_back(text.substr(pos));
      return parts;
    }
    parts.push_back(text.substr(pos, hit - pos));
    pos = hit + sep.size();
  }
}

/// Records of the body before the terminator, one string_view each.
std::vector<std::string_view> split_records(std::string_view raw,
                                            const AnnotationFormat& fmt) {
  std::size_t end = raw.find(fmt.terminator);
  if (end == std::string_view::npos) {
    throw MalformedAnnotation("missing terminator \"" + fmt.terminator + "\"");
  }
  std::string_view tail = raw.substr(end + fmt.terminator.size());
  if (!trim(tail).empty()) {
    throw MalformedAnnotation("unexpected content after terminator: \"" +
                              std::string(trim(tail)) + "\"");
  }
  return split_on(raw.substr(0, end), fmt.record_separator);
}

/// Trimmed fields of one record, split on the delimiter core so spacing
/// around the delimiter never matters.
std::vector<std::string_view> split_fields(std::string_view record,
                                           const std::string& core) {
  std::vector<std::string_view> fields;
  for (std::string_view piece : split_on(record, core)) {
    fields.push_back(trim(piece));
  }
  return fields;
}

void check_span_fields(std::string_view argument, std::string_view group) {
  if (argument.empty()) {
    throw MalformedAnnotation("empty argument field");
  }
  if (group.empty()) {
    throw MalformedAnnotation("empty targeted_group field");
  }
}

template <typename List>
std::string join_records(const List& items, const AnnotationFormat& fmt,
                         std::string (*render)(const typename List::value_type&,
                                               const AnnotationFormat&)) {
  if (items.empty()) {
    throw std::invalid_argument("cannot serialize an empty annotation list");
  }
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      out += " " + fmt.record_separator + " ";
    }
    out += render(items[i], fmt);
  }
  out += " " + fmt.terminator;
  return out;
}

std::string render_triplet(const Triplet& t, const AnnotationFormat& fmt) {
  return t.target + fmt.field_delimiter + t.argument + fmt.field_delimiter +
         t.targeted_group;
}

std::string render_quadruplet(const Quadruplet& q, const AnnotationFormat& fmt) {
  return q.target + fmt.field_delimiter + q.argument + fmt.field_delimiter +
         q.targeted_group + fmt.field_delimiter + to_token(q.hateful, fmt);
}

}  // namespace

std::string AnnotationFormat::field_delimiter_core() const {
  std::string core(trim(field_delimiter));
  if (core.empty()) {
    throw ConfigError("field_delimiter must contain a non-space core");
  }
  return core;
}

void AnnotationFormat::validate() const {
  field_delimiter_core();
  if (trim(record_separator).empty()) {
    throw ConfigError("record_separator must be non-empty");
  }
  if (trim(terminator).empty()) {
    throw ConfigError("terminator must be non-empty");
  }
  if (record_separator == terminator) {
    throw ConfigError("record_separator and terminator must differ");
  }
  if (trim(hate_token).empty() || trim(non_hate_token).empty()) {
    throw ConfigError("hateful tokens must be non-empty");
  }
  if (hate_token == non_hate_token) {
    throw ConfigError("hate_token and non_hate_token must differ");
  }
}

const std::string& to_token(Hateful h, const AnnotationFormat& fmt) {
  return h == Hateful::hate ? fmt.hate_token : fmt.non_hate_token;
}

Hateful hateful_from_token(std::string_view token, const AnnotationFormat& fmt) {
  if (token == fmt.hate_token) {
    return Hateful::hate;
  }
  if (token == fmt.non_hate_token) {
    return Hateful::non_hate;
  }
  throw MalformedAnnotation("unknown hateful token \"" + std::string(token) +
                            "\"");
}

TripletList parse_triplets(std::string_view raw, const AnnotationFormat& fmt) {
  const std::string core = fmt.field_delimiter_core();
  TripletList items;
  for (std::string_view record : split_records(raw, fmt)) {
    auto fields = split_fields(record, core);
    if (fields.size() != 3) {
      throw MalformedAnnotation("expected 3 fields per record, got " +
                                std::to_string(fields.size()));
    }
    check_span_fields(fields[1], fields[2]);
    items.push_back(Triplet{std::string(fields[0]), std::string(fields[1]),
                            collapse_whitespace(fields[2])});
  }
  return items;
}

QuadrupletList parse_quadruplets(std::string_view raw,
                                 const AnnotationFormat& fmt) {
  const std::string core = fmt.field_delimiter_core();
  QuadrupletList items;
  for (std::string_view record : split_records(raw, fmt)) {
    auto fields = split_fields(record, core);
    if (fields.size() != 4) {
      throw MalformedAnnotation("expected 4 fields per record, got " +
                                std::to_string(fields.size()));
    }
    check_span_fields(fields[1], fields[2]);
    items.push_back(Quadruplet{std::string(fields[0]), std::string(fields[1]),
                               collapse_whitespace(fields[2]),
                               hateful_from_token(fields[3], fmt)});
  }
  return items;
}

std::string serialize(const TripletList& items, const AnnotationFormat& fmt) {
  return join_records(items, fmt, &render_triplet);
}

std::string serialize(const QuadrupletList& items, const AnnotationFormat& fmt) {
  return join_records(items, fmt, &render_quadruplet);
}

std::string canonicalize_answer(std::string_view raw, Arity arity,
                                const AnnotationFormat& fmt) {
  try {
    if (arity == Arity::triplet) {
      return serialize(parse_triplets(raw, fmt), fmt);
    }
    return serialize(parse_quadruplets(raw, fmt), fmt);
  } catch (const MalformedAnnotation&) {
    return std::string(kInvalidAnswerKey);
  }
}

}  // namespace sragmav
