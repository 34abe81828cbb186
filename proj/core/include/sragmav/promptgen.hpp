#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sragmav/annotation.hpp"
#include "sragmav/dataset.hpp"
#include "sragmav/reformulate.hpp"
#include "sragmav/retrieval.hpp"

namespace sragmav {

/// Prompt skeleton. `instruction` must contain {example} and {input} exactly
/// once each; `example_format` must contain {content} exactly once and
/// {answer} exactly once when include_example_answer is set.
struct PromptTemplate {
  std::string instruction;
  std::string example_format;
  bool include_example_answer = true;

  void validate() const;  // throws ConfigError

  std::string render_example(std::string_view content,
                             std::string_view answer) const;
  std::string render(std::string_view example_block,
                     std::string_view input) const;
};

/// Task-appropriate default template, phrased around the configured format
/// tokens so custom delimiters stay consistent with the instructions.
PromptTemplate default_prompt_template(Arity arity, const AnnotationFormat& fmt,
                                       const TrRule& rule,
                                       bool include_example_answer = true);

struct TrainingPair {
  std::string prompt;
  std::string completion;
};

enum class PairLayout { pairs, chat };

/// Builds retrieval-augmented prompts over a fixed corpus + index.
class PromptBuilder {
 public:
  /// Every corpus sample must have a vector in the index and vice versa.
  PromptBuilder(const VectorIndex& index, const std::vector<Sample>& corpus,
                PromptTemplate tmpl, Arity arity, AnnotationFormat fmt = {});

  /// One pair per corpus sample, corpus order, each prompted with its
  /// nearest neighbor other than itself. Completions are validated to parse
  /// under the arity. Throws EmptyIndex when the corpus has < 2 samples.
  std::vector<TrainingPair> build_training_pairs() const;

  /// Top-k retrieval prompts for an unseen text, best example first.
  std::vector<std::string> build_inference_prompts(
      std::string_view text, std::span<const float> embedding, int k) const;

  /// The same instruction with an empty example slot.
  std::string zero_shot_prompt(std::string_view text) const;

 private:
  const VectorIndex& index_;
  const std::vector<Sample>& corpus_;
  std::unordered_map<std::int64_t, std::size_t> by_id_;
  PromptTemplate tmpl_;
  Arity arity_;
  AnnotationFormat fmt_;
};

/// JSONL, one object per pair.
///   pairs: {"prompt": ..., "completion": ...}
///   chat:  {"instruction": ..., "input": "", "output": ...}
void write_training_pairs(const std::string& path,
                          const std::vector<TrainingPair>& pairs,
                          PairLayout layout);

PairLayout pair_layout_from_string(std::string_view name);

}  // namespace sragmav
