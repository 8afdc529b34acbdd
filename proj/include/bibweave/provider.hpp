#ifndef BIBWEAVE_PROVIDER_HPP
#define BIBWEAVE_PROVIDER_HPP

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "bibweave/detail/digest.hpp"
#include "bibweave/errors.hpp"
#include "bibweave/sampling.hpp"

// Uniform access to chat-completion backends: request fingerprinting, a
// content-addressed response cache, and a deterministic replay store. The
// live HTTP client lives in provider_http.hpp so that code paths that never
// touch the network stay network-free by construction.

namespace bibweave::provider {

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message)
      : Error("transport error: " + message) {}
};

class ProviderError : public Error {
 public:
  ProviderError(int status_code, std::string response_body)
      : Error("provider returned HTTP " + std::to_string(status_code)),
        status(status_code),
        body(std::move(response_body)) {}

  int status;
  std::string body;
};

class RetriesExhaustedError : public Error {
 public:
  RetriesExhaustedError(int last_status, int attempts)
      : Error("retries exhausted after " + std::to_string(attempts) +
              " attempts, last HTTP status " + std::to_string(last_status)) {}
};

class UnsupportedParameterError : public Error {
 public:
  explicit UnsupportedParameterError(const std::string& profile_name)
      : Error("top_k requested but profile \"" + profile_name +
              "\" does not support it") {}
};

class MissingApiKeyError : public Error {
 public:
  explicit MissingApiKeyError(const std::string& env_name)
      : Error("environment variable \"" + env_name + "\" is unset or empty") {}
};

class MissingReplayEntryError : public Error {
 public:
  explicit MissingReplayEntryError(const std::string& fingerprint)
      : Error("no replay entry for fingerprint " + fingerprint) {}
};

/// One named backend endpoint. Secrets are held only in the environment
/// variable named by `api_key_env`, never in the profile itself.
struct ProviderProfile {
  std::string name;
  std::string base_url;
  std::string model;
  std::string api_key_env;
  bool supports_top_k = false;
  int max_retries = 3;
  double timeout_seconds = 60.0;

  void validate() const {
    if (base_url.rfind("http://", 0) != 0 &&
        base_url.rfind("https://", 0) != 0) {
      throw ConfigError("profile \"" + name +
                        "\": base_url must be an absolute http(s) URL");
    }
    if (model.empty()) {
      throw ConfigError("profile \"" + name + "\": model must be non-empty");
    }
    if (max_retries < 0 || max_retries > 10) {
      throw ConfigError("profile \"" + name +
                        "\": max_retries must be in [0, 10]");
    }
    if (timeout_seconds <= 0.0) {
      throw ConfigError("profile \"" + name + "\": timeout must be positive");
    }
  }
};

struct CompletionRequest {
  std::string system_prompt;
  std::string user_prompt;
  GenerationConfig config;
  int max_tokens = 1024;

  void validate() const {
    if (user_prompt.empty()) {
      throw ConfigError("completion request: user_prompt must be non-empty");
    }
    if (max_tokens < 1) {
      throw ConfigError("completion request: max_tokens must be positive");
    }
    config.validate();
  }
};

struct CompletionResult {
  std::string text;
  std::string fingerprint;
  bool from_cache = false;
  int attempt_count = 1;
};

/// Hex digest of the canonical request serialization. Field order is fixed
/// (model, system_prompt, user_prompt, temperature, top_k, top_p,
/// max_tokens), reals are rendered with exactly 6 decimal places, and the
/// JSON dump carries no insignificant whitespace, so equal requests always
/// produce equal digests. repeat_index is deliberately absent: repeats of
/// one sampling configuration are the same request to the backend.
inline std::string fingerprint(const ProviderProfile& profile,
                               const CompletionRequest& request) {
  nlohmann::ordered_json canonical;
  canonical["model"] = profile.model;
  canonical["system_prompt"] = request.system_prompt;
  canonical["user_prompt"] = request.user_prompt;
  canonical["temperature"] = detail::format_real6(request.config.temperature);
  if (request.config.top_k.has_value()) {
    canonical["top_k"] = *request.config.top_k;
  } else {
    canonical["top_k"] = nullptr;
  }
  canonical["top_p"] = detail::format_real6(request.config.top_p);
  canonical["max_tokens"] = request.max_tokens;
  return bibweave::detail::sha256_hex(canonical.dump());
}

namespace detail {

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Writes via a temp file in the same directory followed by a rename, so
/// readers never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view contents) {
  static std::mt19937_64 rng{std::random_device{}()};
  static std::mutex rng_mutex;
  std::uint64_t nonce;
  {
    std::lock_guard<std::mutex> lock(rng_mutex);
    nonce = rng();
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(nonce);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp.string());
    out.write(contents.data(),
              static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Content-addressed response cache: one body file per fingerprint plus a
/// JSON metadata sidecar. Writes are atomic at file granularity; concurrent
/// writers of one key are harmless because the value is identical.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<std::string> lookup(const std::string& fingerprint) const {
    const auto path = dir_ / fingerprint;
    if (!std::filesystem::exists(path)) return std::nullopt;
    return detail::read_file(path);
  }

  void store(const std::string& fingerprint, const std::string& text,
             nlohmann::ordered_json metadata) const {
    metadata["created_at"] = detail::utc_timestamp();
    detail::write_file_atomic(dir_ / fingerprint, text);
    detail::write_file_atomic(dir_ / (fingerprint + ".meta.json"),
                              metadata.dump(2) + "\n");
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// In-memory fingerprint → recorded-response map loaded from a JSON Lines
/// file ({"fingerprint": hex, "text": string} per line).
class ReplayStore {
 public:
  ReplayStore() = default;

  static ReplayStore load(const std::filesystem::path& file) {
    ReplayStore store;
    std::ifstream in(file);
    if (!in) throw ConfigError("replay file not readable: " + file.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json entry;
      try {
        entry = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("replay file " + file.string() + " line " +
                          std::to_string(line_no) + ": " + e.what());
      }
      if (!entry.contains("fingerprint") || !entry.contains("text")) {
        throw ConfigError("replay file " + file.string() + " line " +
                          std::to_string(line_no) +
                          ": expected fields fingerprint and text");
      }
      store.entries_[entry["fingerprint"].get<std::string>()] =
          entry["text"].get<std::string>();
    }
    return store;
  }

  std::optional<std::string> lookup(const std::string& fingerprint) const {
    auto it = entries_.find(fingerprint);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

/// Appends replay entries as they are observed, one line per unique
/// fingerprint. Safe for concurrent record() calls.
class ReplayWriter {
 public:
  explicit ReplayWriter(std::filesystem::path file) : file_(std::move(file)) {
    std::filesystem::create_directories(file_.parent_path().empty()
                                            ? "."
                                            : file_.parent_path());
    std::ofstream out(file_, std::ios::trunc);
    if (!out) throw Error("cannot create replay file: " + file_.string());
  }

  void record(const std::string& fingerprint, const std::string& text) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!seen_.insert(fingerprint).second) return;
    nlohmann::ordered_json entry;
    entry["fingerprint"] = fingerprint;
    entry["text"] = text;
    std::ofstream out(file_, std::ios::app);
    if (!out) throw Error("cannot append to replay file: " + file_.string());
    out << entry.dump() << "\n";
  }

  std::size_t unique_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return seen_.size();
  }

  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::unordered_set<std::string> seen_;
};

/// Returns the recorded text for the request's fingerprint, byte for byte.
inline CompletionResult replay_complete(const ReplayStore& store,
                                        const ProviderProfile& profile,
                                        const CompletionRequest& request) {
  request.validate();
  const std::string fp = fingerprint(profile, request);
  auto text = store.lookup(fp);
  if (!text.has_value()) throw MissingReplayEntryError(fp);
  return CompletionResult{*text, fp, /*from_cache=*/false,
                          /*attempt_count=*/1};
}

/// A completion backend bound to one profile. Implementations must be safe
/// for concurrent complete() calls; callers bound parallelism.
class Completer {
 public:
  virtual ~Completer() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual const ProviderProfile& profile() const = 0;
};

class ReplayCompleter : public Completer {
 public:
  ReplayCompleter(ProviderProfile profile, const ReplayStore& store)
      : profile_(std::move(profile)), store_(&store) {}

  CompletionResult complete(const CompletionRequest& request) override {
    return replay_complete(*store_, profile_, request);
  }

  const ProviderProfile& profile() const override { return profile_; }

 private:
  ProviderProfile profile_;
  const ReplayStore* store_;
};

/// Wraps any completer and mirrors every completion into a replay file.
class RecordingCompleter : public Completer {
 public:
  RecordingCompleter(Completer& inner, ReplayWriter& writer)
      : inner_(&inner), writer_(&writer) {}

  CompletionResult complete(const CompletionRequest& request) override {
    CompletionResult result = inner_->complete(request);
    writer_->record(result.fingerprint, result.text);
    return result;
  }

  const ProviderProfile& profile() const override { return inner_->profile(); }

 private:
  Completer* inner_;
  ReplayWriter* writer_;
};

}  // namespace bibweave::provider

#endif  // BIBWEAVE_PROVIDER_HPP
