#ifndef BIBWEAVE_PROVIDER_HTTP_HPP
#define BIBWEAVE_PROVIDER_HTTP_HPP

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "bibweave/provider.hpp"

// Live OpenAI-compatible chat-completions client. One wire shape covers
// hosted and local backends; top_k rides along as an extension field only
// when the profile declares support for it.

namespace bibweave::provider {

/// Exponential backoff with full jitter: delay for retry i is drawn
/// uniformly from [0, min(cap, base * factor^i)].
struct BackoffPolicy {
  double base_seconds = 1.0;
  double factor = 2.0;
  double cap_seconds = 30.0;
  bool full_jitter = true;
};

inline std::chrono::duration<double> backoff_delay(const BackoffPolicy& policy,
                                                   int retry_index) {
  double ceiling = policy.base_seconds * std::pow(policy.factor, retry_index);
  ceiling = std::min(ceiling, policy.cap_seconds);
  if (!policy.full_jitter) return std::chrono::duration<double>(ceiling);
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> dist(0.0, ceiling);
  return std::chrono::duration<double>(dist(rng));
}

namespace detail {

struct ParsedBaseUrl {
  std::string origin;       // scheme://host[:port]
  std::string path_prefix;  // "" or "/v1"-style prefix, no trailing slash
};

inline ParsedBaseUrl parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const auto path_start =
      scheme_end == std::string::npos
          ? std::string::npos
          : base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

inline nlohmann::ordered_json build_wire_body(const ProviderProfile& profile,
                                              const CompletionRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = profile.model;
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
  body["messages"] = std::move(messages);
  body["temperature"] = request.config.temperature;
  body["top_p"] = request.config.top_p;
  if (request.config.top_k.has_value() && profile.supports_top_k) {
    body["top_k"] = *request.config.top_k;
  }
  body["max_tokens"] = request.max_tokens;
  return body;
}

inline std::string extract_content(const std::string& response_body,
                                   int status) {
  nlohmann::json payload;
  try {
    payload = nlohmann::json::parse(response_body);
  } catch (const nlohmann::json::exception&) {
    throw ProviderError(status, "unparseable response body: " + response_body);
  }
  if (!payload.contains("choices") || !payload["choices"].is_array() ||
      payload["choices"].empty()) {
    throw ProviderError(status, "response has no choices: " + response_body);
  }
  const auto& message = payload["choices"][0]["message"];
  if (!message.contains("content") || !message["content"].is_string()) {
    throw ProviderError(status, "choice has no message content");
  }
  std::string content = message["content"].get<std::string>();
  if (content.empty()) {
    throw ProviderError(status, "empty completion content");
  }
  return content;
}

}  // namespace detail

/// POSTs the request to {base_url}/chat/completions, retrying HTTP 429 and
/// 5xx with exponential backoff up to profile.max_retries. Cache hits are
/// served without any network activity; successes are stored back into the
/// cache keyed by fingerprint.
inline CompletionResult complete(const ProviderProfile& profile,
                                 const CompletionRequest& request,
                                 const ResponseCache& cache,
                                 const BackoffPolicy& backoff = {}) {
  profile.validate();
  request.validate();
  if (request.config.top_k.has_value() && !profile.supports_top_k) {
    throw UnsupportedParameterError(profile.name);
  }

  const std::string fp = fingerprint(profile, request);
  if (auto hit = cache.lookup(fp)) {
    return CompletionResult{*hit, fp, /*from_cache=*/true, /*attempt_count=*/1};
  }

  const char* key = std::getenv(profile.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw MissingApiKeyError(profile.api_key_env);
  }

  const auto parsed = detail::parse_base_url(profile.base_url);
  const std::string path = parsed.path_prefix + "/chat/completions";
  const std::string body = detail::build_wire_body(profile, request).dump();

  int last_status = 0;
  for (int attempt = 0; attempt <= profile.max_retries; ++attempt) {
    httplib::Client client(parsed.origin);
    const auto timeout_s = static_cast<time_t>(profile.timeout_seconds);
    const auto timeout_us = static_cast<time_t>(
        (profile.timeout_seconds - static_cast<double>(timeout_s)) * 1e6);
    client.set_connection_timeout(timeout_s, timeout_us);
    client.set_read_timeout(timeout_s, timeout_us);
    client.set_write_timeout(timeout_s, timeout_us);
    client.set_bearer_token_auth(key);

    auto response = client.Post(path, body, "application/json");
    if (!response) {
      throw TransportError(httplib::to_string(response.error()) + " (" +
                           parsed.origin + path + ")");
    }

    const int status = response->status;
    if (status >= 200 && status < 300) {
      std::string text = detail::extract_content(response->body, status);
      nlohmann::ordered_json metadata;
      metadata["model"] = profile.model;
      try {
        auto payload = nlohmann::json::parse(response->body);
        if (payload.contains("usage")) metadata["usage"] = payload["usage"];
      } catch (const nlohmann::json::exception&) {
      }
      cache.store(fp, text, std::move(metadata));
      return CompletionResult{std::move(text), fp, /*from_cache=*/false,
                              attempt + 1};
    }

    if (status == 429 || status >= 500) {
      last_status = status;
      if (attempt == profile.max_retries) break;
      std::this_thread::sleep_for(backoff_delay(backoff, attempt));
      continue;
    }

    throw ProviderError(status, response->body);
  }
  throw RetriesExhaustedError(last_status, profile.max_retries + 1);
}

class LiveCompleter : public Completer {
 public:
  LiveCompleter(ProviderProfile profile, const ResponseCache& cache,
                BackoffPolicy backoff = {})
      : profile_(std::move(profile)), cache_(&cache), backoff_(backoff) {}

  CompletionResult complete(const CompletionRequest& request) override {
    return provider::complete(profile_, request, *cache_, backoff_);
  }

  const ProviderProfile& profile() const override { return profile_; }

 private:
  ProviderProfile profile_;
  const ResponseCache* cache_;
  BackoffPolicy backoff_;
};

}  // namespace bibweave::provider

#endif  // BIBWEAVE_PROVIDER_HTTP_HPP
