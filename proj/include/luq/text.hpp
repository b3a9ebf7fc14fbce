#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "luq/domain.hpp"
#include "luq/sampling.hpp"

namespace luq {

/// Rule-based, abbreviation-aware sentence segmentation. Sentences are
/// trimmed, ordered, non-overlapping and together cover every non-whitespace
/// character of the input.
std::vector<Sentence> split_sentences(std::string_view text);

class ClaimSplitter {
 public:
  virtual ~ClaimSplitter() = default;
  /// Claims in source order. Never returns a claim spanning two sentences.
  virtual std::vector<AtomicClaim> split(std::string_view text) = 0;
  virtual std::string id() const = 0;
};

/// Splits each sentence on ", and", ", but", "; " and " and " when both
/// sides carry a verb from a closed list. A right-hand clause that starts
/// with a verb inherits the sentence subject.
class RuleClaimSplitter : public ClaimSplitter {
 public:
  std::vector<AtomicClaim> split(std::string_view text) override;
  std::string id() const override { return "rule-v1"; }
};

/// Asks a chat model to list the facts of each sentence, one per line.
class LlmClaimSplitter : public ClaimSplitter {
 public:
  static constexpr std::string_view kPromptVersion = "atomic-v1";
  static std::string build_prompt(std::string_view sentence);
  /// Bullet or numbered lines become claims; blank lines are dropped.
  static std::vector<std::string> parse_reply(std::string_view reply);

  LlmClaimSplitter(ChatProvider& provider, std::string model_id, GenerationCache* cache = nullptr,
                   std::shared_ptr<ClaimSplitter> fallback = nullptr);

  std::vector<AtomicClaim> split(std::string_view text) override;
  std::string id() const override { return model_id_ + "/" + std::string(kPromptVersion); }

 private:
  std::vector<std::string> split_sentence(const std::string& sentence);

  ChatProvider& provider_;
  std::string model_id_;
  GenerationCache* cache_;
  std::shared_ptr<ClaimSplitter> fallback_;
};

/// Throws Error(splitter_unavailable) when the splitter fails without a fallback.
std::vector<AtomicClaim> split_atomic(std::string_view text, ClaimSplitter& splitter);

}  // namespace luq
