#pragma once

// Deterministic stand-in for an LLM provider and a factuality oracle.
//
// Each entity owns a fixed biography of six slot facts. A model knows an
// entity with probability f in [0,1]; every generated response states each
// slot's true value with probability f and a random wrong value otherwise.
// Responses to the same prompt therefore agree more when f is high, which
// is exactly the signal consistency-based estimators are meant to pick up.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "luq/domain.hpp"
#include "luq/sampling.hpp"

namespace luq::synthetic {

/// Splitmix64 stream; platform-independent unlike the std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, 1).
  double unit();
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t state_;
};

inline constexpr int kSlots = 6;

class World {
 public:
  explicit World(std::uint64_t seed = 7, double refusal_threshold = 0.12);

  std::uint64_t seed() const { return seed_; }

  /// Person name for index i; distinct for i < 4096.
  std::string entity_name(int i) const;
  /// Popularity in [0,1]; drives frequency labels and model knowledge.
  double popularity(std::string_view entity) const;
  FrequencyLabel frequency_label(std::string_view entity) const;
  /// Latent knowledge f of a model about an entity.
  double knowledge(std::string_view model_id, std::string_view entity) const;

  std::string true_value(std::string_view entity, int slot) const;
  std::string sentence(std::string_view entity, int slot, std::string_view value) const;

  /// Response text for one generation. `knowledge` overrides the world's f.
  std::string generate(std::string_view model_id, std::string_view entity, int sample_index, std::uint64_t seed,
                       std::optional<double> knowledge = std::nullopt) const;
  /// Synthetic token log-probabilities for a generated text.
  std::vector<double> token_logprobs(std::string_view entity, std::string_view text) const;

  /// Fraction of the response's slot sentences that state the true value;
  /// 0 when no slot sentence is present.
  double fact_score(std::string_view entity, std::string_view text) const;
  int fact_count(std::string_view entity, std::string_view text) const;

  bool refuses(double knowledge) const { return knowledge < refusal_threshold_; }

 private:
  std::uint64_t seed_;
  double refusal_threshold_;
};

/// Recovers the entity from a biography prompt; falls back to the whole prompt.
std::string entity_from_prompt(std::string_view prompt);

/// Offline chat provider backed by a World. Answers biography prompts with
/// synthetic responses and claim-decomposition prompts with rule-based claims.
class SyntheticProvider : public ChatProvider {
 public:
  using KnowledgeFn = std::function<double(std::string_view model_id, std::string_view entity)>;

  explicit SyntheticProvider(World world, KnowledgeFn knowledge = nullptr);

  ChatCompletion complete(const ChatRequest& request) override;

 private:
  World world_;
  KnowledgeFn knowledge_;
};

}  // namespace luq::synthetic
