#include "http_json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <thread>

#include <httplib.h>

namespace sragmav::detail {

namespace {

bool retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

int delay_for_attempt(const RetryPolicy& retry, int attempt) {
  double delay = retry.initial_delay_ms;
  for (int i = 1; i < attempt; ++i) {
    delay *= retry.multiplier;
  }
  return static_cast<int>(std::min<double>(delay, retry.max_delay_ms));
}

[[noreturn]] void throw_transport(httplib::Error err, const std::string& url) {
  const std::string detail = httplib::to_string(err);
  if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
      err == httplib::Error::Write) {
    throw Timeout("request to " + url + " timed out (" + detail + ")");
  }
  throw BackendUnavailable("cannot reach " + url + " (" + detail + ")");
}

}  // namespace

ParsedUrl parse_url(const std::string& url) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("url must start with http:// or https://: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported url scheme \"" + scheme + "\": " + url);
  }
  std::size_t host_begin = scheme_end + 3;
  if (host_begin >= url.size()) {
    throw ConfigError("url is missing a host: " + url);
  }
  std::size_t path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) {
    return ParsedUrl{url, "/"};
  }
  return ParsedUrl{url.substr(0, path_begin), url.substr(path_begin)};
}

std::string bearer_from_env(const std::string& env_name) {
  if (env_name.empty()) {
    return "";
  }
  const char* value = std::getenv(env_name.c_str());
  if (value == nullptr || *value == '\0') {
    throw ConfigError("api_key_env names \"" + env_name +
                      "\" but the variable is not set");
  }
  return value;
}

nlohmann::json post_json_with_retry(const std::string& url,
                                    const nlohmann::json& body,
                                    const std::string& bearer_token,
                                    int timeout_ms, const RetryPolicy& retry) {
  const ParsedUrl target = parse_url(url);
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + bearer_token);
  }

  const int attempts = std::max(1, retry.attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    // one client per request keeps generate() safe to call concurrently
    httplib::Client client(target.base);
    client.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

    auto res = client.Post(target.path, headers, payload, "application/json");
    if (!res) {
      if (attempt == attempts) {
        throw_transport(res.error(), url);
      }
    } else if (res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw BackendShapeError("non-JSON response from " + url + ": " +
                                e.what());
      }
    } else if (!retryable_status(res->status) || attempt == attempts) {
      throw HttpError(res->status, "HTTP " + std::to_string(res->status) +
                                       " from " + url + ": " + res->body);
    }
    std::this_thread::sleep_for(
        std::chrono::milliseconds(delay_for_attempt(retry, attempt)));
  }
  throw BackendUnavailable("unreachable: " + url);
}

}  // namespace sragmav::detail
