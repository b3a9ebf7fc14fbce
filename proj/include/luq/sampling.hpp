#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "luq/domain.hpp"

namespace luq {

struct ProviderConfig {
  std::string endpoint_url;  // full chat-completions URL, or mock://<world>
  std::string model_id;
  std::string api_key_env_var = "OPENAI_API_KEY";
  double temperature = 0.7;
  int n_samples = 10;
  int max_tokens = 1024;
  std::chrono::milliseconds request_timeout{60000};
  int max_parallel_requests = 4;
  bool request_logprobs = false;

  bool operator==(const ProviderConfig&) const = default;
};

void to_json(Json& j, const ProviderConfig& c);
void from_json(const Json& j, ProviderConfig& c);

/// Case-insensitive refusal patterns plus a length guard. A text is a refusal
/// when it is empty, or when a pattern matches and it is shorter than
/// `min_word_count` words.
class RefusalPolicy {
 public:
  static const std::vector<std::string>& default_patterns();

  RefusalPolicy();
  /// Throws Error(invalid_regex) when a pattern does not compile.
  RefusalPolicy(std::vector<std::string> patterns, int min_word_count);

  const std::vector<std::string>& patterns() const { return patterns_; }
  int min_word_count() const { return min_word_count_; }
  bool any_pattern_matches(std::string_view text) const;

 private:
  std::vector<std::string> patterns_;
  std::vector<std::regex> compiled_;
  int min_word_count_ = 25;
};

int word_count(std::string_view text);
bool detect_refusal(std::string_view text, const RefusalPolicy& policy);

/// Biography prompt with the entity trimmed and substituted.
/// Throws Error(empty_entity) for blank entities.
std::string bio_prompt(std::string_view entity);

struct ChatRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 1024;
  int sample_index = 0;  // 0 is the main response
  bool want_logprobs = false;
  std::optional<std::uint64_t> seed;
};

struct ChatCompletion {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
};

/// One independent completion per call. Implementations must be thread-safe.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatCompletion complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

/// OpenAI-style chat-completion endpoint over HTTP(S).
class HttpChatProvider : public ChatProvider {
 public:
  HttpChatProvider(ProviderConfig config, RetryPolicy retry = {});

  ChatCompletion complete(const ChatRequest& request) override;

  /// Request body as sent on the wire.
  static Json build_request_body(const ChatRequest& request);
  /// Throws Error(malformed_provider_reply) when the body lacks choices[0].message.content.
  static ChatCompletion parse_reply(std::string_view body);

 private:
  ProviderConfig config_;
  RetryPolicy retry_;
  std::string scheme_host_port_;
  std::string path_;
};

struct CacheRecord {
  std::string cache_key;
  std::string query_id;
  std::string model_id;
  int sample_index = 0;
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
  std::string created_at;
};

void to_json(Json& j, const CacheRecord& r);
void from_json(const Json& j, CacheRecord& r);

std::string generation_cache_key(std::string_view model_id, std::string_view prompt, double temperature,
                                 int max_tokens, int sample_index);

/// Append-only record file keyed by cache_key. Lookups take a shared lock;
/// inserts go through one writer. An empty path keeps the cache in memory.
class GenerationCache {
 public:
  GenerationCache() = default;
  explicit GenerationCache(std::filesystem::path file);

  std::optional<CacheRecord> find(const std::string& key) const;
  /// First write wins; a duplicate key is ignored.
  void put(CacheRecord record);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CacheRecord> records_;
  std::filesystem::path path_;
  std::ofstream out_;
};

struct GenerationStats {
  int cache_hits = 0;
  int provider_calls = 0;
};

/// Main response plus cfg.n_samples samples, each a separate provider call,
/// every generation written to the cache before returning.
ResponseSet generate_response_set(const Query& query, const ProviderConfig& cfg, const RefusalPolicy& policy,
                                  ChatProvider& provider, GenerationCache& cache,
                                  std::optional<std::uint64_t> seed = std::nullopt,
                                  GenerationStats* stats = nullptr);

}  // namespace luq
