#pragma once

// Core vocabulary shared by every stage: queries, responses, response sets,
// uncertainty scores and factuality labels. Values are immutable once built;
// helpers below never mutate their arguments.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace luq {

using Json = nlohmann::ordered_json;

enum class FrequencyLabel { very_rare, rare, medium, frequent, very_frequent, unknown };

std::string_view to_string(FrequencyLabel label);
/// Unrecognised or empty strings map to `unknown`.
FrequencyLabel parse_frequency_label(std::string_view text);

enum class Method { luq, luq_pair, luq_atomic, selfcheck_nli, lexsim, numsets, eigv, deg, ecc, msp, mcse, se };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view text);
/// Every method in declaration order.
const std::vector<Method>& all_methods();

struct Query {
  std::string id;
  std::string entity;
  std::string prompt;
  FrequencyLabel frequency_label = FrequencyLabel::unknown;

  bool operator==(const Query&) const = default;
};

/// A sentence or an atomic claim: non-empty text plus its position in the source.
struct TextUnit {
  std::string text;
  int index = 0;

  bool operator==(const TextUnit&) const = default;
};
using Sentence = TextUnit;
using AtomicClaim = TextUnit;

struct Response {
  std::string text;
  std::vector<Sentence> sentences;
  std::optional<std::vector<AtomicClaim>> atomic_claims;
  std::optional<std::vector<double>> token_logprobs;
  bool is_refusal = false;

  bool operator==(const Response&) const = default;
};

/// The main response r_a plus n stochastic samples for one query.
struct ResponseSet {
  Query query;
  Response main;
  std::vector<Response> samples;
  double temperature = 0.7;
  std::string model_id;

  /// |R'| = n + 1.
  std::size_t size() const { return samples.size() + 1; }
  /// Member i of R' where index 0 is the main response.
  const Response& member(std::size_t i) const { return i == 0 ? main : samples.at(i - 1); }

  bool operator==(const ResponseSet&) const = default;
};

struct UncertaintyScore {
  Method method = Method::luq;
  double value = 0.0;
  bool bounded01 = true;

  bool operator==(const UncertaintyScore&) const = default;
};

struct FactualityRecord {
  std::string query_id;
  double fs = 0.0;  // fraction in [0,1]
  bool responded = true;
  std::optional<int> num_facts;
  // Optional extras carried by the factuality file.
  FrequencyLabel frequency = FrequencyLabel::unknown;
  std::optional<std::string> model_id;

  bool operator==(const FactualityRecord&) const = default;
};

/// Dense symmetric m x m similarity matrix, row-major.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t m, double fill = 0.0) : m_(m), entries_(m * m, fill) {}

  std::size_t size() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * m_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return entries_[i * m_ + j]; }
  const std::vector<double>& entries() const { return entries_; }

  static SimilarityMatrix identity(std::size_t m);
  static SimilarityMatrix ones(std::size_t m);
  /// Binary block matrix: entry 1 iff both indices share a label.
  static SimilarityMatrix from_blocks(const std::vector<int>& labels);

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  std::size_t m_ = 0;
  std::vector<double> entries_;
};

struct Violation {
  std::string field;
  std::string rule;

  std::string message() const { return field + ": " + rule; }
  bool operator==(const Violation&) const = default;
};

/// Reports every broken invariant of a response set; never throws.
std::vector<Violation> validate_response_set(const ResponseSet& rs);
/// Matrix invariants: m >= 2, symmetric within 1e-9, unit diagonal, entries in [0,1].
std::vector<Violation> validate_similarity_matrix(const SimilarityMatrix& s);

std::string trim(std::string_view text);

void to_json(Json& j, const Query& q);
void from_json(const Json& j, Query& q);
void to_json(Json& j, const TextUnit& u);
void from_json(const Json& j, TextUnit& u);
void to_json(Json& j, const Response& r);
void from_json(const Json& j, Response& r);
void to_json(Json& j, const ResponseSet& rs);
void from_json(const Json& j, ResponseSet& rs);
void to_json(Json& j, const UncertaintyScore& s);
void from_json(const Json& j, UncertaintyScore& s);
void to_json(Json& j, const FactualityRecord& f);
void from_json(const Json& j, FactualityRecord& f);

}  // namespace luq
