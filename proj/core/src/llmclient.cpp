#include "sragmav/llmclient.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "http_json.hpp"
#include "sragmav/text.hpp"

namespace sragmav {

namespace {

bool contains_any(const std::string& text,
                  const std::vector<std::string>& needles) {
  for (const std::string& needle : needles) {
    if (!needle.empty() && text.find(needle) != std::string::npos) {
      return true;
    }
  }
  return false;
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpChatOptions options)
    : options_(std::move(options)) {
  detail::parse_url(options_.url);  // fail fast on malformed config
}

std::string HttpChatBackend::generate(const std::string& prompt,
                                      const GenParams& params) {
  nlohmann::json body{
      {"model", options_.model},
      {"messages", nlohmann::json::array({nlohmann::json{
                       {"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"max_tokens", params.max_tokens}};
  if (!params.stop.empty()) {
    body["stop"] = params.stop;
  }
  nlohmann::json reply = detail::post_json_with_retry(
      options_.url, body, detail::bearer_from_env(options_.api_key_env),
      options_.timeout_ms, options_.retry);

  if (!reply.contains("choices") || !reply["choices"].is_array() ||
      reply["choices"].empty()) {
    throw BackendShapeError("chat response has no choices array");
  }
  const auto& first = reply["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw BackendShapeError("chat response lacks choices[0].message.content");
  }
  std::string text = first["message"]["content"].get<std::string>();
  if (options_.append_missing_stop && !params.stop.empty() &&
      !contains_any(text, params.stop)) {
    text += " " + params.stop.front();
  }
  return text;
}

void MockDistribution::validate() const {
  if (answers.empty()) {
    throw ConfigError("mock distribution needs at least one answer");
  }
  if (answers.size() != probabilities.size()) {
    throw ConfigError("mock distribution has " + std::to_string(answers.size()) +
                      " answers but " + std::to_string(probabilities.size()) +
                      " probabilities");
  }
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ConfigError("mock probabilities must be finite and > 0");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ConfigError("mock probabilities must sum to 1, got " +
                      std::to_string(sum));
  }
  for (std::size_t i = 0; i < answers.size(); ++i) {
    for (std::size_t j = i + 1; j < answers.size(); ++j) {
      if (answers[i] == answers[j]) {
        throw ConfigError("mock answers must be distinct: \"" + answers[i] +
                          "\"");
      }
    }
  }
}

void MockSpec::validate() const {
  fallback.validate();
  for (const auto& [needle, dist] : rules) {
    if (needle.empty()) {
      throw ConfigError("mock rule \"contains\" must be non-empty");
    }
    dist.validate();
  }
}

MockSpec load_mock_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open mock spec: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }

  auto read_dist = [&](const nlohmann::json& node) {
    MockDistribution dist;
    if (!node.contains("answers") || !node.contains("probabilities")) {
      throw ConfigError(path + ": distribution needs answers + probabilities");
    }
    dist.answers = node["answers"].get<std::vector<std::string>>();
    dist.probabilities = node["probabilities"].get<std::vector<double>>();
    return dist;
  };

  MockSpec spec;
  if (doc.contains("seed")) {
    spec.seed = doc["seed"].get<std::uint64_t>();
  }
  if (!doc.contains("fallback")) {
    throw ConfigError(path + ": mock spec needs a fallback distribution");
  }
  spec.fallback = read_dist(doc["fallback"]);
  if (doc.contains("rules")) {
    for (const auto& rule : doc["rules"]) {
      if (!rule.contains("contains") || !rule["contains"].is_string()) {
        throw ConfigError(path + ": each rule needs a string \"contains\"");
      }
      spec.rules.emplace_back(rule["contains"].get<std::string>(),
                              read_dist(rule));
    }
  }
  spec.validate();
  return spec;
}

MockBackend::MockBackend(MockSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

const MockDistribution& MockBackend::distribution_for(
    const std::string& prompt) const {
  for (const auto& [needle, dist] : spec_.rules) {
    if (prompt.find(needle) != std::string::npos) {
      return dist;
    }
  }
  return spec_.fallback;
}

std::string MockBackend::generate(const std::string& prompt,
                                  const GenParams& params) {
  (void)params;  // sampling is scripted; temperature has no effect here
  const MockDistribution& dist = distribution_for(prompt);
  const std::uint64_t key = fnv1a64(prompt);

  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = streams_.try_emplace(key);
  if (inserted) {
    it->second.rng.seed(mix64(spec_.seed ^ mix64(key)));
  }
  const double u =
      std::uniform_real_distribution<double>(0.0, 1.0)(it->second.rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < dist.answers.size(); ++i) {
    cumulative += dist.probabilities[i];
    if (u < cumulative) {
      return dist.answers[i];
    }
  }
  return dist.answers.back();
}

std::vector<BatchItem> generate_batch(const std::vector<std::string>& prompts,
                                      const GenParams& params,
                                      GenerationBackend& backend,
                                      int max_in_flight) {
  if (max_in_flight < 1) {
    throw std::invalid_argument("max_in_flight must be >= 1");
  }
  std::vector<BatchItem> items(prompts.size());
  if (prompts.empty()) {
    return items;
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_in_flight),
                            prompts.size());
  std::atomic<std::size_t> next{0};

  auto run = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) {
        return;
      }
      BatchItem& item = items[i];
      item.index = i;
      try {
        item.text = backend.generate(prompts[i], params);
        item.ok = true;
      } catch (const Error& e) {
        item.ok = false;
        item.error_kind = e.kind();
        item.error = e.what();
      } catch (const std::exception& e) {
        item.ok = false;
        item.error_kind = "internal";
        item.error = e.what();
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(run);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  return items;
}

}  // namespace sragmav
