#pragma once

// Black-box baselines over a response-similarity graph (LexSim, NumSets,
// EigV, Deg, Ecc) and white-box baselines over token log-probabilities
// (MSP, MCSE, SE).
//
// Every estimator works on the pool of non-refused responses, the same pool
// the LUQ estimators use; a refused main response raises Error(main_refused).

#include <functional>
#include <string_view>
#include <vector>

#include "luq/domain.hpp"
#include "luq/entailment.hpp"
#include "luq/spectral.hpp"

namespace luq {

/// Token-level longest-common-subsequence F1 on lowercased words.
double lcs_f1(std::string_view a, std::string_view b);

using LexicalSimilarity = std::function<double(std::string_view, std::string_view)>;

enum class SimilarityKind { entail_sym, lexical };

/// Pairwise similarity of full responses. entail_sym averages the two
/// directional entailment probabilities; identical texts score exactly 1.
/// The diagonal is forced to 1 and the result symmetrized.
SimilarityMatrix similarity_matrix(const ResponseSet& rs, SimilarityKind kind, EntailmentScorer* scorer,
                                   const LexicalSimilarity& lexical = lcs_f1);

UncertaintyScore lexsim_uncertainty(const SimilarityMatrix& s);
UncertaintyScore lexsim_uncertainty(const ResponseSet& rs, const LexicalSimilarity& sim = lcs_f1);

struct SemanticPartition {
  std::vector<int> cluster;  // cluster id per pooled response, numbered by first appearance
  int count = 0;
};

/// Union-find over edges i~j where both directional probabilities exceed
/// `threshold`. `directional[i][j]` is P(entail | r_i, r_j).
SemanticPartition partition_from_entailment(const std::vector<std::vector<double>>& directional, double threshold);
SemanticPartition semantic_partition(const ResponseSet& rs, EntailmentScorer& scorer, double threshold = 0.5);

/// Number of semantic sets; an integer in [1, m]. bounded01 = false.
UncertaintyScore numsets(const ResponseSet& rs, EntailmentScorer& scorer, double threshold = 0.5);

/// Sum over Laplacian eigenvalues of max(0, 1 - lambda).
UncertaintyScore eigv_uncertainty(const SimilarityMatrix& s);
/// trace(m I - D) / m^2.
UncertaintyScore deg_uncertainty(const SimilarityMatrix& s);
/// Norm of the centered spectral embedding built from eigenvectors with
/// eigenvalue below `eigenvalue_cutoff` (at least one is kept).
UncertaintyScore ecc_uncertainty(const SimilarityMatrix& s, double eigenvalue_cutoff = 0.9);

/// -max_i sum_t logprob. Throws Error(missing_logprobs).
UncertaintyScore msp(const ResponseSet& rs);
/// -(1/m) sum_i l_i, l_i the summed (or per-token mean) log-probability.
UncertaintyScore mcse(const ResponseSet& rs, bool length_normalize = false);

struct SemanticEntropyOptions {
  double entail_threshold = 0.5;
  bool length_normalize = false;
  /// Use cluster sizes as masses when log-probabilities are absent.
  bool count_fallback = false;
};

/// Entropy of cluster masses p(c) proportional to sum of exp(l_i) over c.
UncertaintyScore semantic_entropy(const ResponseSet& rs, EntailmentScorer& scorer,
                                  const SemanticEntropyOptions& options = {});

}  // namespace luq
