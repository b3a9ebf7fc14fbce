#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "luq/domain.hpp"
#include "luq/error.hpp"

namespace luq {

/// Raw NLI logits for one (hypothesis, premise) pair.
struct EntailmentJudgment {
  double entail = 0.0;
  double neutral = 0.0;
  double contradict = 0.0;

  bool operator==(const EntailmentJudgment&) const = default;
};

/// exp(l_e) / (exp(l_e) + exp(l_c)); the neutral logit is ignored.
/// Throws Error(non_finite_logit).
double entail_probability(const EntailmentJudgment& j);
double contradict_probability(const EntailmentJudgment& j);

struct TextPair {
  std::string hypothesis;
  std::string premise;

  bool operator==(const TextPair&) const = default;
};

class EntailmentScorer {
 public:
  virtual ~EntailmentScorer() = default;
  /// One judgment per pair, same order. Must be safe for concurrent calls.
  virtual std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) = 0;
  virtual std::string id() const = 0;
  /// Premises longer than this many bytes are cut from the tail before scoring.
  virtual std::optional<std::size_t> max_premise_length() const { return std::nullopt; }
};

/// Deterministic rule scorer for tests and offline runs.
///
/// Hypothesis and premise are lowercased, tokenized into words and stripped
/// of stopwords. A value token (a number, or a word from the fixture table)
/// is attached to the nearest preceding content word, its head. Then:
///   - the premise attaches a different value of the same kind to the same
///     head  -> (-3, 0, 3)
///   - every hypothesis content word occurs in the premise -> (3, 0, -3)
///   - otherwise -> (0, 1, 0)
class MockScorer : public EntailmentScorer {
 public:
  static constexpr EntailmentJudgment kEntail{3.0, 0.0, -3.0};
  static constexpr EntailmentJudgment kContradict{-3.0, 0.0, 3.0};
  static constexpr EntailmentJudgment kNeutral{0.0, 1.0, 0.0};

  /// Categorical values that conflict with each other when attached to the same head.
  static const std::unordered_map<std::string, std::string>& value_table();

  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override;
  std::string id() const override { return "mock-v1"; }

  static EntailmentJudgment judge(std::string_view hypothesis, std::string_view premise);
};

/// Client for the remote NLI service (POST /v1/nli, GET /healthz).
class RemoteScorer : public EntailmentScorer {
 public:
  struct Options {
    std::chrono::milliseconds timeout{120000};
    std::size_t max_batch = 64;
    std::ptrdiff_t max_in_flight = 4;
    std::optional<std::size_t> max_premise_length;
  };

  explicit RemoteScorer(std::string base_url);
  RemoteScorer(std::string base_url, Options options);

  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override;
  std::string id() const override;
  std::optional<std::size_t> max_premise_length() const override { return options_.max_premise_length; }

  /// Model id reported by /healthz. Throws Error(scorer_unavailable).
  std::string health() const;

  static Json build_request_body(std::span<const TextPair> pairs);
  /// Throws Error(scorer_unavailable) on schema or length mismatch.
  static std::vector<EntailmentJudgment> parse_response(std::string_view body, std::size_t expected);

 private:
  std::string base_url_;
  Options options_;
  mutable std::counting_semaphore<1024> in_flight_;
  mutable std::mutex id_mutex_;
  mutable std::optional<std::string> model_id_;
};

/// Judgments keyed by hash(hypothesis, premise, scorer_id); append-only file,
/// single writer, concurrent readers. An empty path keeps it in memory.
class JudgmentCache {
 public:
  JudgmentCache() = default;
  explicit JudgmentCache(std::filesystem::path file);

  static std::string key(const TextPair& pair, std::string_view scorer_id);

  std::optional<EntailmentJudgment> find(const std::string& key) const;
  void put(const std::string& key, const EntailmentJudgment& j);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EntailmentJudgment> entries_;
  std::filesystem::path path_;
  std::ofstream out_;
};

struct GatewayStats {
  std::atomic<long> scorer_calls{0};
  std::atomic<long> pairs_scored{0};
  std::atomic<long> cache_hits{0};
  std::atomic<long> truncations{0};
};

/// Raised when the scorer fails; lists the input positions left unscored.
class UnscoredPairsError : public Error {
 public:
  UnscoredPairsError(std::vector<std::size_t> unscored, const std::string& what)
      : Error(ErrorCode::scorer_unavailable, what), unscored_(std::move(unscored)) {}
  const std::vector<std::size_t>& unscored() const { return unscored_; }

 private:
  std::vector<std::size_t> unscored_;
};

/// Cache hits never reach the scorer; misses go out in batches of at most
/// `batch_size` and are persisted before returning.
std::vector<EntailmentJudgment> score_cached(EntailmentScorer& scorer, std::span<const TextPair> pairs,
                                             JudgmentCache& cache, std::size_t batch_size = 16,
                                             GatewayStats* stats = nullptr);

/// Scorer decorator routing every batch through score_cached.
class CachedScorer : public EntailmentScorer {
 public:
  CachedScorer(EntailmentScorer& inner, JudgmentCache& cache, std::size_t batch_size = 16)
      : inner_(inner), cache_(cache), batch_size_(batch_size) {}

  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override {
    return score_cached(inner_, pairs, cache_, batch_size_, &stats_);
  }
  std::string id() const override { return inner_.id(); }

  const GatewayStats& stats() const { return stats_; }

 private:
  EntailmentScorer& inner_;
  JudgmentCache& cache_;
  std::size_t batch_size_;
  GatewayStats stats_;
};

}  // namespace luq
