#include "sragmav/promptgen.hpp"

#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace sragmav {

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

void require_once(std::string_view text, std::string_view needle,
                  std::string_view where) {
  const std::size_t n = count_occurrences(text, needle);
  if (n != 1) {
    throw ConfigError(std::string(where) + " must contain " +
                      std::string(needle) + " exactly once, found " +
                      std::to_string(n));
  }
}

/// Left-to-right single-pass substitution; substituted values are never
/// rescanned, so placeholder-looking content cannot inject.
std::string substitute(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> repl) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t best = std::string_view::npos;
    const std::pair<std::string_view, std::string_view>* chosen = nullptr;
    for (const auto& r : repl) {
      const std::size_t hit = tmpl.find(r.first, pos);
      if (hit < best) {
        best = hit;
        chosen = &r;
      }
    }
    if (chosen == nullptr) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, best - pos));
    out.append(chosen->second);
    pos = best + chosen->first.size();
  }
  return out;
}

}  // namespace

void PromptTemplate::validate() const {
  require_once(instruction, "{example}", "instruction");
  require_once(instruction, "{input}", "instruction");
  require_once(example_format, "{content}", "example_format");
  const std::size_t answers = count_occurrences(example_format, "{answer}");
  if (include_example_answer && answers != 1) {
    throw ConfigError("example_format must contain {answer} exactly once, found " +
                      std::to_string(answers));
  }
  if (!include_example_answer && answers != 0) {
    throw ConfigError(
        "example_format must not contain {answer} when answers are disabled");
  }
}

std::string PromptTemplate::render_example(std::string_view content,
                                           std::string_view answer) const {
  if (include_example_answer) {
    return substitute(example_format,
                      {{"{content}", content}, {"{answer}", answer}});
  }
  return substitute(example_format, {{"{content}", content}});
}

std::string PromptTemplate::render(std::string_view example_block,
                                   std::string_view input) const {
  return substitute(instruction,
                    {{"{example}", example_block}, {"{input}", input}});
}

PromptTemplate default_prompt_template(Arity arity, const AnnotationFormat& fmt,
                                       const TrRule& rule,
                                       bool include_example_answer) {
  const std::string delim = fmt.field_delimiter;
  std::string instruction =
      "You extract fine-grained hate-speech annotation records from Chinese "
      "social media text.\n";
  if (arity == Arity::triplet) {
    instruction +=
        "For every opinion in the text output one record: target" + delim +
        "argument" + delim + "targeted_group. Write the target span as it "
        "appears (or NULL when unstated), the argument span, and the group "
        "the opinion is aimed at. When the opinion is not hateful, the "
        "targeted group is \"" + rule.non_hate_group + "\".\n";
  } else {
    instruction +=
        "For every opinion in the text output one record: target" + delim +
        "argument" + delim + "targeted_group" + delim +
        "hatefulness. Write the target span as it appears (or NULL when "
        "unstated), the argument span, the group the opinion is aimed at, "
        "and \"" + fmt.hate_token + "\" or \"" + fmt.non_hate_token +
        "\". Non-hateful opinions use the group \"" + rule.non_hate_group +
        "\" with \"" + fmt.non_hate_token + "\".\n";
  }
  instruction += "Separate records with \"" + fmt.record_separator +
                 "\" and end the answer with \"" + fmt.terminator + "\".\n\n" +
                 "{example}\n" + "Text: {input}\n" + "Answer: ";

  PromptTemplate tmpl;
  tmpl.instruction = std::move(instruction);
  tmpl.example_format = include_example_answer
                            ? "Here is a similar annotated example.\n"
                              "Text: {content}\nAnswer: {answer}\n"
                            : "Here is a similar example.\nText: {content}\n";
  tmpl.include_example_answer = include_example_answer;
  return tmpl;
}

PromptBuilder::PromptBuilder(const VectorIndex& index,
                             const std::vector<Sample>& corpus,
                             PromptTemplate tmpl, Arity arity,
                             AnnotationFormat fmt)
    : index_(index),
      corpus_(corpus),
      by_id_(index_by_id(corpus)),
      tmpl_(std::move(tmpl)),
      arity_(arity),
      fmt_(std::move(fmt)) {
  tmpl_.validate();
  fmt_.validate();
  if (index.size() != corpus.size()) {
    throw IdMismatch("index has " + std::to_string(index.size()) +
                     " vectors, corpus has " + std::to_string(corpus.size()) +
                     " samples");
  }
  for (const Sample& s : corpus) {
    if (!index.contains(s.id)) {
      throw MissingVector("no vector for corpus sample id " +
                          std::to_string(s.id));
    }
  }
}

std::vector<TrainingPair> PromptBuilder::build_training_pairs() const {
  if (corpus_.size() < 2) {
    throw EmptyIndex(
        "self-retrieval needs at least 2 samples (every prompt excludes its "
        "own sample)");
  }
  std::vector<TrainingPair> pairs;
  pairs.reserve(corpus_.size());
  for (const Sample& s : corpus_) {
    try {
      if (arity_ == Arity::triplet) {
        parse_triplets(s.output, fmt_);
      } else {
        parse_quadruplets(s.output, fmt_);
      }
    } catch (const MalformedAnnotation& e) {
      throw MalformedAnnotation("completion for sample " + std::to_string(s.id) +
                                " does not parse: " + e.what());
    }
    const auto hits = index_.retrieve(index_.vector_of(s.id), 1, s.id);
    if (hits.empty()) {
      throw EmptyIndex("no retrieval candidate for sample id " +
                       std::to_string(s.id));
    }
    const Sample& neighbor = corpus_[by_id_.at(hits[0].sample_id)];
    pairs.push_back(TrainingPair{
        tmpl_.render(tmpl_.render_example(neighbor.content, neighbor.output),
                     s.content),
        s.output});
  }
  return pairs;
}

std::vector<std::string> PromptBuilder::build_inference_prompts(
    std::string_view text, std::span<const float> embedding, int k) const {
  const auto hits = index_.retrieve(embedding, k);
  std::vector<std::string> prompts;
  prompts.reserve(hits.size());
  for (const RetrievalHit& hit : hits) {
    const Sample& neighbor = corpus_[by_id_.at(hit.sample_id)];
    prompts.push_back(tmpl_.render(
        tmpl_.render_example(neighbor.content, neighbor.output), text));
  }
  return prompts;
}

std::string PromptBuilder::zero_shot_prompt(std::string_view text) const {
  return tmpl_.render("", text);
}

void write_training_pairs(const std::string& path,
                          const std::vector<TrainingPair>& pairs,
                          PairLayout layout) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write training pairs: " + path);
  }
  for (const TrainingPair& pair : pairs) {
    nlohmann::json row;
    if (layout == PairLayout::pairs) {
      row = {{"prompt", pair.prompt}, {"completion", pair.completion}};
    } else {
      row = {{"instruction", pair.prompt}, {"input", ""}, {"output", pair.completion}};
    }
    out << row.dump() << "\n";
  }
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

PairLayout pair_layout_from_string(std::string_view name) {
  if (name == "pairs") {
    return PairLayout::pairs;
  }
  if (name == "chat") {
    return PairLayout::chat;
  }
  throw ConfigError("unknown pair layout \"" + std::string(name) +
                    "\" (expected pairs or chat)");
}

}  // namespace sragmav
