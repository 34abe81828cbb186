#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sragmav/annotation.hpp"
#include "sragmav/errors.hpp"

namespace sragmav {

/// Everything the pipeline reads from its config file. File syntax is a
/// strict TOML subset: [section], key = value, quoted strings with
/// \" \\ \n \t escapes, integers, floats, booleans, arrays of strings,
/// # comments. Unknown sections or keys and duplicate keys are errors.
struct PipelineConfig {
  struct Dataset {
    std::string train;
    std::string test;
  } dataset;

  struct Tr {
    std::string non_hate_group = "non-hate";
    std::string on_violation = "skip";  // skip | abort
  } tr;

  AnnotationFormat format;

  struct Embedding {
    std::string backend = "mock";  // mock | http | file
    std::string url = "http://127.0.0.1:8080/v1/embeddings";
    std::string model = "bge-large-zh-v1.5";
    std::string api_key_env;
    std::string vectors;  // file backend: path to precomputed vectors
    std::string mock_mode = "basis";  // basis | gaussian
    int dim = 64;
    int batch_size = 64;
    int timeout_ms = 30000;
  } embedding;

  struct Llm {
    std::string backend = "mock";  // mock | http
    std::string url = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "qwen2.5-7b";
    std::string api_key_env;
    std::string mock_spec;  // mock backend: path to the distribution file
    double temperature = 0.1;
    int max_tokens = 256;
    std::vector<std::string> stop = {"[END]"};
    bool append_missing_stop = true;
    int timeout_ms = 60000;
    int retry_attempts = 3;
    int retry_initial_ms = 500;
    int retry_max_ms = 8000;
    double retry_multiplier = 2.0;
  } llm;

  struct Mav {
    int k = 10;
    int tau = 200;
    int max_rounds = 0;  // 0 -> ceil(4 * tau / k)
    int failure_budget = 0;  // 0 -> 3 * k
    bool per_triplet_voting = false;
  } mav;

  struct Template {
    std::string instruction;     // empty -> built-in default
    std::string example_format;  // empty -> built-in default
    bool include_example_answer = true;
  } tmpl;

  struct Scoring {
    double theta = 0.5;
    std::string comparison = "strict_gt";  // strict_gt | gte
  } scoring;

  struct Runtime {
    std::uint64_t seed = 0;
    int workers = 1;
    int max_in_flight = 4;
  } runtime;

  /// Cross-field checks (enum strings, positive counts, mav stopping
  /// reachable, format tokens sane). Throws ConfigError.
  void validate() const;
};

/// Parse + validate. `source_name` seasons error messages.
PipelineConfig parse_config(std::string_view text,
                            const std::string& source_name = "<config>");
PipelineConfig load_config(const std::string& path);

/// Canonical rendering; load(dump(cfg)) == cfg and dump is idempotent.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace sragmav
