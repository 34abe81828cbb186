#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "sragmav/errors.hpp"
#include "sragmav/retrieval.hpp"

namespace sragmav::detail {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // leading slash, query string included
};

ParsedUrl parse_url(const std::string& url);  // throws ConfigError

/// Reads the bearer token from the named env var; empty name means no auth.
/// A named but unset variable is a ConfigError, not a silent anonymous call.
std::string bearer_from_env(const std::string& env_name);

/// POST with retry. Connection failures, timeouts, 408, 429, and 5xx retry
/// with exponential backoff up to retry.attempts total tries; other
/// non-2xx statuses throw HttpError at once. A 2xx body that is not JSON
/// throws BackendShapeError.
nlohmann::json post_json_with_retry(const std::string& url,
                                    const nlohmann::json& body,
                                    const std::string& bearer_token,
                                    int timeout_ms, const RetryPolicy& retry);

}  // namespace sragmav::detail
