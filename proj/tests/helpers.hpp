#pragma once

// Shared test fixtures: scripted generation backends, randomized annotation
// generators, and independently coded oracles for retrieval ranking, LCS
// similarity, and optimal matching.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sragmav/annotation.hpp"
#include "sragmav/errors.hpp"
#include "sragmav/llmclient.hpp"
#include "sragmav/reformulate.hpp"
#include "sragmav/retrieval.hpp"
#include "sragmav/scoring.hpp"
#include "sragmav/text.hpp"

namespace testutil {

class TempDir {
 public:
  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto candidate =
          base / ("sragmav_test_" + std::to_string(next_.fetch_add(1)));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = std::move(candidate);
        return;
      }
    }
    throw std::runtime_error("cannot create temp directory");
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  static inline std::atomic<int> next_{0};
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw std::runtime_error("test write failed: " + path);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("test read failed: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Replays a fixed reply sequence per prompt; repeats the last entry once
/// the sequence is exhausted.
class ScriptedBackend : public sragmav::GenerationBackend {
 public:
  void script(std::string prompt, std::vector<std::string> replies) {
    scripts_[std::move(prompt)] = Entry{std::move(replies), 0};
  }

  std::string generate(const std::string& prompt,
                       const sragmav::GenParams&) override {
    std::scoped_lock lock(mutex_);
    auto it = scripts_.find(prompt);
    if (it == scripts_.end() || it->second.replies.empty()) {
      throw sragmav::BackendUnavailable("no script for prompt: " + prompt);
    }
    Entry& entry = it->second;
    const std::size_t i = std::min(entry.next, entry.replies.size() - 1);
    ++entry.next;
    return entry.replies[i];
  }

 private:
  struct Entry {
    std::vector<std::string> replies;
    std::size_t next = 0;
  };

  std::map<std::string, Entry> scripts_;
  std::mutex mutex_;
};

class ConstantBackend : public sragmav::GenerationBackend {
 public:
  explicit ConstantBackend(std::string reply) : reply_(std::move(reply)) {}

  std::string generate(const std::string&, const sragmav::GenParams&) override {
    ++calls_;
    return reply_;
  }

  int calls() const noexcept { return calls_.load(); }

 private:
  std::string reply_;
  std::atomic<int> calls_{0};
};

/// Throws for prompts containing the marker, delegates everything else.
class OutageBackend : public sragmav::GenerationBackend {
 public:
  OutageBackend(sragmav::GenerationBackend& inner, std::string marker)
      : inner_(inner), marker_(std::move(marker)) {}

  std::string generate(const std::string& prompt,
                       const sragmav::GenParams& params) override {
    if (prompt.find(marker_) != std::string::npos) {
      throw sragmav::BackendUnavailable("scripted outage");
    }
    return inner_.generate(prompt, params);
  }

 private:
  sragmav::GenerationBackend& inner_;
  std::string marker_;
};

/// Fails the first `failures` calls overall, then delegates.
class FlakyBackend : public sragmav::GenerationBackend {
 public:
  FlakyBackend(sragmav::GenerationBackend& inner, int failures)
      : inner_(inner), remaining_(failures) {}

  std::string generate(const std::string& prompt,
                       const sragmav::GenParams& params) override {
    if (remaining_.fetch_sub(1) > 0) {
      throw sragmav::BackendUnavailable("flaky failure");
    }
    return inner_.generate(prompt, params);
  }

 private:
  sragmav::GenerationBackend& inner_;
  std::atomic<int> remaining_;
};

inline sragmav::MockSpec categorical_spec(std::uint64_t seed,
                                          std::vector<std::string> answers,
                                          std::vector<double> probabilities) {
  sragmav::MockSpec spec;
  spec.seed = seed;
  spec.fallback =
      sragmav::MockDistribution{std::move(answers), std::move(probabilities)};
  return spec;
}

// ---- randomized annotation data ----

/// Lowercase alnum words joined by single spaces: stable under both field
/// trimming and whitespace collapsing, so parse/serialize round-trips are
/// exact.
inline std::string random_words(std::mt19937_64& rng, int max_words = 3,
                                int max_word_len = 8) {
  std::uniform_int_distribution<int> words(1, max_words);
  std::uniform_int_distribution<int> word_len(1, max_word_len);
  std::uniform_int_distribution<int> ch(0, 35);
  std::string out;
  const int n = words(rng);
  for (int w = 0; w < n; ++w) {
    if (w > 0) {
      out.push_back(' ');
    }
    const int m = word_len(rng);
    for (int i = 0; i < m; ++i) {
      const int c = ch(rng);
      out.push_back(c < 26 ? static_cast<char>('a' + c)
                           : static_cast<char>('0' + (c - 26)));
    }
  }
  return out;
}

inline const std::vector<std::string>& hate_groups() {
  static const std::vector<std::string> kGroups = {
      "Racism", "Sexism", "Region", "LGBTQ", "others", "Racism, Sexism"};
  return kGroups;
}

inline sragmav::Quadruplet random_consistent_quad(std::mt19937_64& rng,
                                                  const sragmav::TrRule& rule) {
  sragmav::Quadruplet q;
  std::bernoulli_distribution no_target(0.15);
  std::bernoulli_distribution is_hate(0.6);
  q.target = no_target(rng) ? std::string() : random_words(rng);
  q.argument = random_words(rng);
  if (is_hate(rng)) {
    q.hateful = sragmav::Hateful::hate;
    std::uniform_int_distribution<std::size_t> pick(0, hate_groups().size() - 1);
    q.targeted_group = hate_groups()[pick(rng)];
  } else {
    q.hateful = sragmav::Hateful::non_hate;
    q.targeted_group = rule.non_hate_group;
  }
  return q;
}

inline sragmav::QuadrupletList random_consistent_quads(
    std::mt19937_64& rng, const sragmav::TrRule& rule, int max_records = 3) {
  std::uniform_int_distribution<int> count(1, max_records);
  sragmav::QuadrupletList items;
  const int n = count(rng);
  items.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    items.push_back(random_consistent_quad(rng, rule));
  }
  return items;
}

inline std::string random_spaces(std::mt19937_64& rng, int max = 3) {
  std::uniform_int_distribution<int> n(0, max);
  return std::string(static_cast<std::size_t>(n(rng)), ' ');
}

/// Renders the records with arbitrary spacing around every delimiter,
/// separator, and terminator. Must parse back to exactly `items`.
inline std::string fuzz_spacing(const sragmav::QuadrupletList& items,
                                const sragmav::AnnotationFormat& fmt,
                                std::mt19937_64& rng) {
  const std::string core = fmt.field_delimiter_core();
  std::string out = random_spaces(rng);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      out += random_spaces(rng) + fmt.record_separator + random_spaces(rng);
    }
    const sragmav::Quadruplet& q = items[i];
    out += q.target;
    out += random_spaces(rng) + core + random_spaces(rng);
    out += q.argument;
    out += random_spaces(rng) + core + random_spaces(rng);
    out += q.targeted_group;
    out += random_spaces(rng) + core + random_spaces(rng);
    out += to_token(q.hateful, fmt);
  }
  out += random_spaces(rng) + fmt.terminator + random_spaces(rng);
  return out;
}

// ---- oracles ----

/// Ranking oracle sharing the index's storage quantization (rows normalized
/// in double then held as float, query kept in double) but with its own
/// selection logic.
inline std::vector<sragmav::RetrievalHit> oracle_retrieve(
    const std::vector<std::int64_t>& ids,
    const std::vector<std::vector<float>>& vectors,
    const std::vector<float>& query, int k,
    std::optional<std::int64_t> exclude = std::nullopt) {
  auto norm_of = [](const std::vector<float>& v) {
    double sum = 0.0;
    for (float x : v) {
      sum += static_cast<double>(x) * static_cast<double>(x);
    }
    return std::sqrt(sum);
  };
  const double qnorm = norm_of(query);
  std::vector<double> unit(query.size());
  for (std::size_t j = 0; j < query.size(); ++j) {
    unit[j] = static_cast<double>(query[j]) / qnorm;
  }
  std::vector<sragmav::RetrievalHit> hits;
  for (std::size_t row = 0; row < ids.size(); ++row) {
    if (exclude && ids[row] == *exclude) {
      continue;
    }
    const double norm = norm_of(vectors[row]);
    double score = 0.0;
    for (std::size_t j = 0; j < vectors[row].size(); ++j) {
      const float stored =
          static_cast<float>(static_cast<double>(vectors[row][j]) / norm);
      score += static_cast<double>(stored) * unit[j];
    }
    hits.push_back(sragmav::RetrievalHit{ids[row], score});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const sragmav::RetrievalHit& a,
                      const sragmav::RetrievalHit& b) {
                     if (a.score != b.score) {
                       return a.score > b.score;
                     }
                     return a.sample_id < b.sample_id;
                   });
  if (hits.size() > static_cast<std::size_t>(k)) {
    hits.resize(static_cast<std::size_t>(k));
  }
  return hits;
}

/// Recursive memoized LCS, structurally unlike the rolling-row DP in the
/// scorer.
inline int oracle_lcs(const std::vector<char32_t>& a,
                      const std::vector<char32_t>& b) {
  std::vector<std::vector<int>> memo(a.size() + 1,
                                     std::vector<int>(b.size() + 1, -1));
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> int {
    if (i == a.size() || j == b.size()) {
      return 0;
    }
    int& m = memo[i][j];
    if (m >= 0) {
      return m;
    }
    if (a[i] == b[j]) {
      return m = 1 + self(self, i + 1, j + 1);
    }
    return m = std::max(self(self, i + 1, j), self(self, i, j + 1));
  };
  return rec(rec, 0, 0);
}

inline double oracle_similarity(std::string_view a, std::string_view b) {
  const auto ca = sragmav::decode_utf8(sragmav::trim(a));
  const auto cb = sragmav::decode_utf8(sragmav::trim(b));
  if (ca.empty() && cb.empty()) {
    return 1.0;
  }
  return 2.0 * oracle_lcs(ca, cb) /
         static_cast<double>(ca.size() + cb.size());
}

/// Maximum bipartite matching by augmenting paths: the optimal TP a perfect
/// matcher could reach, an upper bound for the scorer's greedy TP.
template <typename MatchFn>
long oracle_max_matching(const sragmav::QuadrupletList& preds,
                         const sragmav::QuadrupletList& golds,
                         MatchFn&& matches) {
  std::vector<int> pred_of(golds.size(), -1);
  auto augment = [&](auto&& self, std::size_t p,
                     std::vector<char>& visited) -> bool {
    for (std::size_t g = 0; g < golds.size(); ++g) {
      if (visited[g] || !matches(preds[p], golds[g])) {
        continue;
      }
      visited[g] = 1;
      if (pred_of[g] < 0 ||
          self(self, static_cast<std::size_t>(pred_of[g]), visited)) {
        pred_of[g] = static_cast<int>(p);
        return true;
      }
    }
    return false;
  };
  long total = 0;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    std::vector<char> visited(golds.size(), 0);
    if (augment(augment, p, visited)) {
      ++total;
    }
  }
  return total;
}

}  // namespace testutil
