#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "sragmav/errors.hpp"
#include "sragmav/retrieval.hpp"  // RetryPolicy

namespace sragmav {

struct GenParams {
  double temperature = 0.1;
  int max_tokens = 256;
  std::vector<std::string> stop = {"[END]"};
};

/// One text completion per call. Implementations must be safe to call from
/// several threads at once.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string generate(const std::string& prompt,
                               const GenParams& params) = 0;
};

struct HttpChatOptions {
  std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "qwen2.5-7b";
  std::string api_key_env;  // env var holding the bearer token, if any
  int timeout_ms = 60000;
  /// Servers strip stop sequences from the reply; re-append the first stop
  /// string when none is present so annotations still parse.
  bool append_missing_stop = true;
  RetryPolicy retry;
};

/// Chat-completions client: POSTs model/messages/temperature/max_tokens/stop
/// and returns choices[0].message.content. Retries connection failures,
/// timeouts, 408/429, and 5xx with exponential backoff; other statuses raise
/// HttpError immediately.
class HttpChatBackend : public GenerationBackend {
 public:
  explicit HttpChatBackend(HttpChatOptions options);

  std::string generate(const std::string& prompt,
                       const GenParams& params) override;

 private:
  HttpChatOptions options_;
};

/// One categorical answer distribution.
struct MockDistribution {
  std::vector<std::string> answers;
  std::vector<double> probabilities;

  void validate() const;  // throws ConfigError
};

/// Scripted backend behavior. `rules` are matched by substring against the
/// prompt (first match in listed order wins); `fallback` covers the rest.
struct MockSpec {
  std::uint64_t seed = 0;
  MockDistribution fallback;
  std::vector<std::pair<std::string, MockDistribution>> rules;

  void validate() const;
};

/// Reads {"seed": ..., "fallback": {...}, "rules": [{"contains": ...,
/// "answers": [...], "probabilities": [...]}]}.
MockSpec load_mock_spec(const std::string& path);

/// Samples answers from the spec. Each distinct prompt gets its own RNG
/// stream seeded from (spec seed, prompt hash), so concurrent calls on
/// different prompts cannot perturb each other's sequences.
class MockBackend : public GenerationBackend {
 public:
  explicit MockBackend(MockSpec spec);

  std::string generate(const std::string& prompt,
                       const GenParams& params) override;

 private:
  struct Stream {
    std::mt19937_64 rng;
  };

  const MockDistribution& distribution_for(const std::string& prompt) const;

  MockSpec spec_;
  std::map<std::uint64_t, Stream> streams_;
  std::mutex mutex_;
};

struct BatchItem {
  std::size_t index = 0;
  bool ok = false;
  std::string text;
  std::string error_kind;
  std::string error;
};

/// Runs the backend over every prompt with at most `max_in_flight` worker
/// threads. Results come back indexed by prompt position regardless of
/// completion order; per-prompt failures are captured, never thrown.
std::vector<BatchItem> generate_batch(const std::vector<std::string>& prompts,
                                      const GenParams& params,
                                      GenerationBackend& backend,
                                      int max_in_flight);

}  // namespace sragmav
