#include "luq/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "luq/error.hpp"

namespace luq {

namespace {

std::vector<const Response*> pooled(const ResponseSet& rs) {
  if (rs.main.is_refusal || trim(rs.main.text).empty())
    throw Error(ErrorCode::main_refused, "main response of " + rs.query.id + " is a refusal");
  std::vector<const Response*> out{&rs.main};
  for (const auto& s : rs.samples)
    if (!s.is_refusal && !trim(s.text).empty()) out.push_back(&s);
  return out;
}

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// P(entail | r_i, r_j) for all ordered pairs in one scorer batch.
std::vector<std::vector<double>> directional_entailment(const std::vector<const Response*>& pool,
                                                        EntailmentScorer& scorer) {
  const std::size_t m = pool.size();
  std::vector<std::vector<double>> p(m, std::vector<double>(m, 1.0));
  std::vector<TextPair> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> where;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j || pool[i]->text == pool[j]->text) continue;
      pairs.push_back({pool[i]->text, pool[j]->text});
      where.emplace_back(i, j);
    }
  if (!pairs.empty()) {
    auto judged = scorer.score_batch(pairs);
    for (std::size_t k = 0; k < pairs.size(); ++k) p[where[k].first][where[k].second] = entail_probability(judged[k]);
  }
  return p;
}

double sequence_logprob(const Response& r, bool length_normalize) {
  if (!r.token_logprobs) throw Error(ErrorCode::missing_logprobs, "response lacks token log-probabilities");
  const auto& lps = *r.token_logprobs;
  if (length_normalize && lps.empty()) throw Error(ErrorCode::missing_logprobs, "response has zero tokens");
  const double sum = std::accumulate(lps.begin(), lps.end(), 0.0);
  return length_normalize ? sum / lps.size() : sum;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

double lcs_f1(std::string_view a, std::string_view b) {
  const auto x = lower_words(a);
  const auto y = lower_words(b);
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j)
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[y.size()]);
  return 2.0 * lcs / static_cast<double>(x.size() + y.size());
}

SimilarityMatrix similarity_matrix(const ResponseSet& rs, SimilarityKind kind, EntailmentScorer* scorer,
                                   const LexicalSimilarity& lexical) {
  const auto pool = pooled(rs);
  const std::size_t m = pool.size();
  if (m < 2) throw Error(ErrorCode::unscorable_pair, "need at least two usable responses in " + rs.query.id);
  SimilarityMatrix s(m);
  if (kind == SimilarityKind::entail_sym) {
    if (!scorer) throw Error(ErrorCode::invalid_argument, "entailment similarity needs a scorer");
    const auto p = directional_entailment(pool, *scorer);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) s(i, j) = 0.5 * (p[i][j] + p[j][i]);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double v = 0.5 * (lexical(pool[i]->text, pool[j]->text) + lexical(pool[j]->text, pool[i]->text));
        s(i, j) = v;
        s(j, i) = v;
      }
  }
  for (std::size_t i = 0; i < m; ++i) s(i, i) = 1.0;
  return s;
}

UncertaintyScore lexsim_uncertainty(const SimilarityMatrix& s) {
  const std::size_t m = s.size();
  if (m < 2) throw Error(ErrorCode::invalid_argument, "lexical similarity needs m >= 2");
  double sum = 0.0;
  bool bounded = true;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      sum += s(i, j);
      bounded = bounded && s(i, j) >= 0.0 && s(i, j) <= 1.0;
    }
  return {Method::lexsim, 1.0 - sum / static_cast<double>(m * (m - 1)), bounded};
}

UncertaintyScore lexsim_uncertainty(const ResponseSet& rs, const LexicalSimilarity& sim) {
  return lexsim_uncertainty(similarity_matrix(rs, SimilarityKind::lexical, nullptr, sim));
}

SemanticPartition partition_from_entailment(const std::vector<std::vector<double>>& directional, double threshold) {
  const std::size_t m = directional.size();
  UnionFind uf(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (directional[i][j] > threshold && directional[j][i] > threshold) uf.unite(i, j);
  SemanticPartition out;
  out.cluster.assign(m, -1);
  std::vector<int> id_of_root(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    auto root = uf.find(i);
    if (id_of_root[root] < 0) id_of_root[root] = out.count++;
    out.cluster[i] = id_of_root[root];
  }
  return out;
}

SemanticPartition semantic_partition(const ResponseSet& rs, EntailmentScorer& scorer, double threshold) {
  return partition_from_entailment(directional_entailment(pooled(rs), scorer), threshold);
}

UncertaintyScore numsets(const ResponseSet& rs, EntailmentScorer& scorer, double threshold) {
  return {Method::numsets, static_cast<double>(semantic_partition(rs, scorer, threshold).count), false};
}

UncertaintyScore eigv_uncertainty(const SimilarityMatrix& s) {
  const auto spectrum = symmetric_eigen(laplacian(s));
  double sum = 0.0;
  for (double lambda : spectrum.eigenvalues) sum += std::max(0.0, 1.0 - lambda);
  return {Method::eigv, sum, false};
}

UncertaintyScore deg_uncertainty(const SimilarityMatrix& s) {
  const std::size_t m = s.size();
  if (m == 0) throw Error(ErrorCode::invalid_argument, "degree uncertainty needs m >= 1");
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < m; ++j) degree += s(i, j);
    trace += static_cast<double>(m) - degree;
  }
  return {Method::deg, trace / static_cast<double>(m * m), false};
}

UncertaintyScore ecc_uncertainty(const SimilarityMatrix& s, double eigenvalue_cutoff) {
  const std::size_t m = s.size();
  const auto spectrum = symmetric_eigen(laplacian(s));
  std::size_t k = 0;
  while (k < m && spectrum.eigenvalues[k] < eigenvalue_cutoff) ++k;
  k = std::max<std::size_t>(k, 1);
  double norm_sq = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double centre = 0.0;
    for (std::size_t j = 0; j < m; ++j) centre += spectrum.eigenvectors(j, c);
    centre /= static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double d = spectrum.eigenvectors(j, c) - centre;
      norm_sq += d * d;
    }
  }
  return {Method::ecc, std::sqrt(norm_sq), false};
}

UncertaintyScore msp(const ResponseSet& rs) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto* r : pooled(rs)) best = std::max(best, sequence_logprob(*r, false));
  return {Method::msp, 0.0 - best, false};
}

UncertaintyScore mcse(const ResponseSet& rs, bool length_normalize) {
  const auto pool = pooled(rs);
  double sum = 0.0;
  for (const auto* r : pool) sum += sequence_logprob(*r, length_normalize);
  return {Method::mcse, 0.0 - sum / static_cast<double>(pool.size()), false};
}

UncertaintyScore semantic_entropy(const ResponseSet& rs, EntailmentScorer& scorer,
                                  const SemanticEntropyOptions& options) {
  const auto pool = pooled(rs);
  std::vector<double> loglik(pool.size(), 0.0);
  bool use_counts = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i]->token_logprobs) {
      if (!options.count_fallback) throw Error(ErrorCode::missing_logprobs, "semantic entropy needs log-probabilities");
      use_counts = true;
      break;
    }
    loglik[i] = sequence_logprob(*pool[i], options.length_normalize);
  }
  if (use_counts) std::fill(loglik.begin(), loglik.end(), 0.0);

  const auto partition = partition_from_entailment(directional_entailment(pool, scorer), options.entail_threshold);
  // Cluster log-masses via log-sum-exp.
  std::vector<double> peak(partition.count, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pool.size(); ++i) peak[partition.cluster[i]] = std::max(peak[partition.cluster[i]], loglik[i]);
  std::vector<double> acc(partition.count, 0.0);
  for (std::size_t i = 0; i < pool.size(); ++i) acc[partition.cluster[i]] += std::exp(loglik[i] - peak[partition.cluster[i]]);
  std::vector<double> log_mass(partition.count);
  for (int c = 0; c < partition.count; ++c) log_mass[c] = peak[c] + std::log(acc[c]);
  const double top = *std::max_element(log_mass.begin(), log_mass.end());
  double z = 0.0;
  for (double lm : log_mass) z += std::exp(lm - top);
  double entropy = 0.0;
  for (double lm : log_mass) {
    const double p = std::exp(lm - top) / z;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return {Method::se, std::max(0.0, entropy), false};
}

}  // namespace luq
