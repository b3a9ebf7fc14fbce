#include "luq/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "luq/error.hpp"
#include "luq/hashing.hpp"

namespace luq {

// --- config ---------------------------------------------------------------

void to_json(Json& j, const ProviderConfig& c) {
  j = Json{{"endpoint_url", c.endpoint_url},
           {"model_id", c.model_id},
           {"api_key_env_var", c.api_key_env_var},
           {"temperature", c.temperature},
           {"n_samples", c.n_samples},
           {"max_tokens", c.max_tokens},
           {"request_timeout_ms", c.request_timeout.count()},
           {"max_parallel_requests", c.max_parallel_requests},
           {"request_logprobs", c.request_logprobs}};
}

void from_json(const Json& j, ProviderConfig& c) {
  ProviderConfig d;
  c.endpoint_url = j.at("endpoint_url").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.api_key_env_var = j.value("api_key_env_var", d.api_key_env_var);
  c.temperature = j.value("temperature", d.temperature);
  c.n_samples = j.value("n_samples", d.n_samples);
  c.max_tokens = j.value("max_tokens", d.max_tokens);
  c.request_timeout = std::chrono::milliseconds(j.value("request_timeout_ms", d.request_timeout.count()));
  c.max_parallel_requests = j.value("max_parallel_requests", d.max_parallel_requests);
  c.request_logprobs = j.value("request_logprobs", d.request_logprobs);
}

// --- refusal --------------------------------------------------------------

const std::vector<std::string>& RefusalPolicy::default_patterns() {
  static const std::vector<std::string> patterns{
      "I(?:'|’)m sorry", "I cannot", "I can(?:'|’)t", "I do not have", "I don(?:'|’)t have", "as an AI",
  };
  return patterns;
}

RefusalPolicy::RefusalPolicy() : RefusalPolicy(default_patterns(), 25) {}

RefusalPolicy::RefusalPolicy(std::vector<std::string> patterns, int min_word_count)
    : patterns_(std::move(patterns)), min_word_count_(min_word_count) {
  compiled_.reserve(patterns_.size());
  for (const auto& p : patterns_) {
    try {
      compiled_.emplace_back(p, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::invalid_regex, "pattern '" + p + "': " + e.what());
    }
  }
}

bool RefusalPolicy::any_pattern_matches(std::string_view text) const {
  return std::any_of(compiled_.begin(), compiled_.end(), [&](const std::regex& re) {
    return std::regex_search(text.begin(), text.end(), re);
  });
}

int word_count(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

bool detect_refusal(std::string_view text, const RefusalPolicy& policy) {
  int words = word_count(text);
  if (words == 0) return true;
  return words < policy.min_word_count() && policy.any_pattern_matches(text);
}

std::string bio_prompt(std::string_view entity) {
  std::string name = trim(entity);
  if (name.empty()) throw Error(ErrorCode::empty_entity, "entity must be non-empty");
  return "Tell me a short bio of the person " + name +
         ". Begin with their birth, significant life events, achievements, and contributions. Include their "
         "education, career milestones, any notable awards or recognitions received, and their impact on their "
         "field or society. Ensure the biography is concise, factual, and engaging, covering key aspects of their "
         "life and work.";
}

// --- HTTP provider --------------------------------------------------------

namespace {

void split_url(const std::string& url, std::string& scheme_host_port, std::string& path) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::invalid_argument, "endpoint url lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port = url;
    path = "/";
  } else {
    scheme_host_port = url.substr(0, path_start);
    path = url.substr(path_start);
  }
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpChatProvider::HttpChatProvider(ProviderConfig config, RetryPolicy retry)
    : config_(std::move(config)), retry_(retry) {
  split_url(config_.endpoint_url, scheme_host_port_, path_);
}

Json HttpChatProvider::build_request_body(const ChatRequest& request) {
  Json body{{"model", request.model_id},
            {"messages", Json::array({Json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (request.want_logprobs) body["logprobs"] = true;
  if (request.seed) body["seed"] = *request.seed + static_cast<std::uint64_t>(request.sample_index);
  return body;
}

ChatCompletion HttpChatProvider::parse_reply(std::string_view body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::malformed_provider_reply, "reply is not JSON");
  try {
    const auto& choice = j.at("choices").at(0);
    ChatCompletion out;
    const auto& content = choice.at("message").at("content");
    out.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
        choice["logprobs"]["content"].is_array()) {
      std::vector<double> lps;
      for (const auto& tok : choice["logprobs"]["content"]) lps.push_back(tok.at("logprob").get<double>());
      out.token_logprobs = std::move(lps);
    }
    return out;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::malformed_provider_reply, e.what());
  }
}

ChatCompletion HttpChatProvider::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.request_timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!config_.api_key_env_var.empty()) {
    if (const char* key = std::getenv(config_.api_key_env_var.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = build_request_body(request).dump();

  auto backoff = retry_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.multiplier));
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw Error(ErrorCode::auth_failure, "provider answered HTTP " + std::to_string(res->status));
    if (transient_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::malformed_provider_reply, "unexpected HTTP " + std::to_string(res->status));
    return parse_reply(res->body);
  }
  throw Error(ErrorCode::provider_unreachable,
              config_.endpoint_url + " after " + std::to_string(retry_.max_retries) + " retries: " + last_error);
}

// --- cache ----------------------------------------------------------------

void to_json(Json& j, const CacheRecord& r) {
  j = Json{{"cache_key", r.cache_key},   {"query_id", r.query_id}, {"model_id", r.model_id},
           {"sample_index", r.sample_index}, {"text", r.text}};
  if (r.token_logprobs) j["token_logprobs"] = *r.token_logprobs;
  j["created_at"] = r.created_at;
}

void from_json(const Json& j, CacheRecord& r) {
  r.cache_key = j.at("cache_key").get<std::string>();
  r.query_id = j.value("query_id", std::string{});
  r.model_id = j.value("model_id", std::string{});
  r.sample_index = j.value("sample_index", 0);
  r.text = j.at("text").get<std::string>();
  r.token_logprobs.reset();
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null())
    r.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  r.created_at = j.value("created_at", std::string{});
}

std::string generation_cache_key(std::string_view model_id, std::string_view prompt, double temperature,
                                 int max_tokens, int sample_index) {
  Json key = Json::array({model_id, prompt, temperature, max_tokens, sample_index});
  return sha256_hex(key.dump());
}

GenerationCache::GenerationCache(std::filesystem::path file) : path_(std::move(file)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::ifstream in(path_); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j = Json::parse(line, nullptr, false);
      // A torn trailing line from an interrupted run is skipped.
      if (j.is_discarded() || !j.contains("cache_key")) continue;
      auto rec = j.get<CacheRecord>();
      records_.try_emplace(rec.cache_key, std::move(rec));
    }
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::io, "cannot open cache file " + path_.string());
}

std::optional<CacheRecord> GenerationCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::put(CacheRecord record) {
  std::unique_lock lock(mutex_);
  if (records_.contains(record.cache_key)) return;
  if (out_.is_open()) {
    out_ << Json(record).dump() << '\n';
    out_.flush();
  }
  auto key = record.cache_key;
  records_.emplace(std::move(key), std::move(record));
}

std::size_t GenerationCache::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

// --- response sets --------------------------------------------------------

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int error_rank(ErrorCode code) {
  switch (code) {
    case ErrorCode::auth_failure: return 0;
    case ErrorCode::malformed_provider_reply: return 1;
    default: return 2;
  }
}

}  // namespace

ResponseSet generate_response_set(const Query& query, const ProviderConfig& cfg, const RefusalPolicy& policy,
                                  ChatProvider& provider, GenerationCache& cache, std::optional<std::uint64_t> seed,
                                  GenerationStats* stats) {
  if (!(cfg.temperature > 0.0)) throw Error(ErrorCode::invalid_argument, "sampling temperature must be > 0");
  if (cfg.n_samples < 1) throw Error(ErrorCode::invalid_argument, "n_samples must be >= 1");
  if (trim(query.prompt).empty()) throw Error(ErrorCode::invalid_argument, "query " + query.id + " has no prompt");

  const int total = cfg.n_samples + 1;
  std::vector<std::optional<CacheRecord>> slots(total);
  std::vector<int> misses;
  for (int i = 0; i < total; ++i) {
    slots[i] = cache.find(generation_cache_key(cfg.model_id, query.prompt, cfg.temperature, cfg.max_tokens, i));
    if (!slots[i]) misses.push_back(i);
  }
  if (stats) stats->cache_hits += total - static_cast<int>(misses.size());

  std::vector<std::exception_ptr> failures(total);
  if (!misses.empty()) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next++; k < misses.size(); k = next++) {
        const int idx = misses[k];
        try {
          ChatRequest req{cfg.model_id, query.prompt, cfg.temperature, cfg.max_tokens, idx, cfg.request_logprobs, seed};
          ChatCompletion done = provider.complete(req);
          CacheRecord rec{generation_cache_key(cfg.model_id, query.prompt, cfg.temperature, cfg.max_tokens, idx),
                          query.id,
                          cfg.model_id,
                          idx,
                          std::move(done.text),
                          std::move(done.token_logprobs),
                          utc_timestamp()};
          cache.put(rec);
          slots[idx] = std::move(rec);
        } catch (...) {
          failures[idx] = std::current_exception();
        }
      }
    };
    const int workers = std::clamp(cfg.max_parallel_requests, 1, static_cast<int>(misses.size()));
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (stats) stats->provider_calls += static_cast<int>(misses.size());
  }

  std::optional<Error> worst;
  std::vector<int> missing;
  for (int i = 0; i < total; ++i) {
    if (!failures[i]) continue;
    missing.push_back(i);
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      if (!worst || error_rank(e.code()) < error_rank(worst->code())) worst = e;
    } catch (const std::exception& e) {
      if (!worst) worst = Error(ErrorCode::provider_unreachable, e.what());
    }
  }
  if (worst) {
    std::ostringstream msg;
    msg << "query " << query.id << ": " << missing.size() << " of " << total
        << " generations unavailable (cached " << total - static_cast<int>(missing.size()) << "); first error: "
        << worst->what();
    throw Error(worst->code(), msg.str());
  }

  auto to_response = [&](const CacheRecord& rec) {
    Response r;
    r.text = rec.text;
    r.token_logprobs = rec.token_logprobs;
    r.is_refusal = detect_refusal(r.text, policy);
    return r;
  };
  ResponseSet rs;
  rs.query = query;
  rs.model_id = cfg.model_id;
  rs.temperature = cfg.temperature;
  rs.main = to_response(*slots[0]);
  for (int i = 1; i < total; ++i) rs.samples.push_back(to_response(*slots[i]));
  return rs;
}

}  // namespace luq
