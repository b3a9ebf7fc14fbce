#pragma once

// Sentence-level consistency estimators: LUQ, LUQ-Pair, LUQ-Atomic and the
// SelfCheckNLI baseline.
//
// For a response set R' = {r_a, r_1..r_n}:
//   S(r_i, r')  mean over units u of r_i of P(entail | u, r')
//   C(x, r_i)   mean of S(r_i, r') over r' in R' \ {r_i}
//   U(x)        mean of 1 - C(x, r_i) over r_i in R'
// LUQ uses sentences against the full reference text, LUQ-Atomic uses atomic
// claims, LUQ-Pair takes for each unit the best-matching reference sentence.
//
// Refused responses are dropped from R' before any of the above. A refused
// main response raises Error(main_refused) so the caller can route the
// question to the penalized aggregates instead.

#include <cstddef>
#include <optional>
#include <vector>

#include "luq/domain.hpp"
#include "luq/entailment.hpp"
#include "luq/text.hpp"

namespace luq {

enum class Granularity { sentence, atomic };
enum class LuqVariant { luq, luq_pair, luq_atomic };

Method method_of(LuqVariant variant);

/// Units of a response: stored sentences/claims when present, else segmented
/// on the fly. Atomic without a splitter uses RuleClaimSplitter.
std::vector<TextUnit> units_of(const Response& r, Granularity granularity, ClaimSplitter* splitter = nullptr);

/// S(r_i, r_ref) against the whole reference text. Throws Error(empty_response).
double response_similarity(const Response& r_i, const Response& r_ref, EntailmentScorer& scorer,
                           Granularity granularity, ClaimSplitter* splitter = nullptr);

/// S(r_i, r_ref) where each unit keeps its best reference sentence.
double response_similarity_pairwise(const Response& r_i, const Response& r_ref, EntailmentScorer& scorer,
                                    Granularity granularity, ClaimSplitter* splitter = nullptr);

struct ConsistencyTable {
  // Indexed by member of R' (0 is the main response).
  std::vector<bool> in_pool;
  std::vector<std::vector<TextUnit>> units;
  // unit_probabilities[i][ref][u]; empty when (i, ref) was not scored.
  std::vector<std::vector<std::vector<double>>> unit_probabilities;
  std::vector<std::vector<std::optional<double>>> similarity;
  std::vector<std::optional<double>> confidence;
  double uncertainty = 0.0;
};

/// Scores every ordered pair of the pool in a single scorer batch.
/// `pair_units` picks the hypothesis units of LUQ-Pair (sentences by default).
ConsistencyTable consistency_table(const ResponseSet& rs, EntailmentScorer& scorer, LuqVariant variant,
                                   ClaimSplitter* splitter = nullptr, Granularity pair_units = Granularity::sentence);

/// C(x, r_i) for member i of R'.
double luq_confidence(const ResponseSet& rs, std::size_t member, EntailmentScorer& scorer, LuqVariant variant,
                      ClaimSplitter* splitter = nullptr);

UncertaintyScore luq_uncertainty(const ResponseSet& rs, EntailmentScorer& scorer, LuqVariant variant,
                                 ClaimSplitter* splitter = nullptr, Granularity pair_units = Granularity::sentence);

/// Mean over main-response sentences of the mean contradiction probability
/// against each sample.
UncertaintyScore selfcheck_nli(const ResponseSet& rs, EntailmentScorer& scorer);

}  // namespace luq
