#include "luq/estimators.hpp"

#include <algorithm>
#include <numeric>

#include "luq/error.hpp"

namespace luq {

namespace {

double mean(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size(); }

bool blank(const Response& r) { return trim(r.text).empty(); }

Granularity granularity_of(LuqVariant v) { return v == LuqVariant::luq_atomic ? Granularity::atomic : Granularity::sentence; }

// Premises used for one reference: the full text, or each of its sentences.
std::vector<std::string> premises_for(const Response& ref, bool pairwise) {
  if (!pairwise) return {ref.text};
  std::vector<std::string> out;
  for (auto& s : units_of(ref, Granularity::sentence)) out.push_back(std::move(s.text));
  return out;
}

double similarity_impl(const Response& r_i, const Response& r_ref, EntailmentScorer& scorer, Granularity g,
                       ClaimSplitter* splitter, bool pairwise) {
  auto units = units_of(r_i, g, splitter);
  if (units.empty()) throw Error(ErrorCode::empty_response, "response has no units to score");
  if (blank(r_ref)) throw Error(ErrorCode::empty_response, "reference response is empty");
  const auto premises = premises_for(r_ref, pairwise);
  std::vector<TextPair> pairs;
  for (const auto& u : units)
    for (const auto& p : premises) pairs.push_back({u.text, p});
  const auto judged = scorer.score_batch(pairs);
  std::vector<double> per_unit;
  for (std::size_t u = 0; u < units.size(); ++u) {
    double best = 0.0;
    for (std::size_t k = 0; k < premises.size(); ++k)
      best = std::max(best, entail_probability(judged[u * premises.size() + k]));
    per_unit.push_back(best);
  }
  return mean(per_unit);
}

}  // namespace

Method method_of(LuqVariant variant) {
  switch (variant) {
    case LuqVariant::luq: return Method::luq;
    case LuqVariant::luq_pair: return Method::luq_pair;
    case LuqVariant::luq_atomic: return Method::luq_atomic;
  }
  return Method::luq;
}

std::vector<TextUnit> units_of(const Response& r, Granularity granularity, ClaimSplitter* splitter) {
  if (granularity == Granularity::sentence) return r.sentences.empty() ? split_sentences(r.text) : r.sentences;
  if (r.atomic_claims) return *r.atomic_claims;
  if (splitter) return split_atomic(r.text, *splitter);
  RuleClaimSplitter rules;
  return split_atomic(r.text, rules);
}

double response_similarity(const Response& r_i, const Response& r_ref, EntailmentScorer& scorer,
                           Granularity granularity, ClaimSplitter* splitter) {
  return similarity_impl(r_i, r_ref, scorer, granularity, splitter, false);
}

double response_similarity_pairwise(const Response& r_i, const Response& r_ref, EntailmentScorer& scorer,
                                    Granularity granularity, ClaimSplitter* splitter) {
  return similarity_impl(r_i, r_ref, scorer, granularity, splitter, true);
}

ConsistencyTable consistency_table(const ResponseSet& rs, EntailmentScorer& scorer, LuqVariant variant,
                                   ClaimSplitter* splitter, Granularity pair_units) {
  if (rs.samples.empty()) throw Error(ErrorCode::invalid_argument, "need n >= 1 samples");
  if (rs.main.is_refusal || blank(rs.main))
    throw Error(ErrorCode::main_refused, "main response of " + rs.query.id + " is a refusal");

  const std::size_t m = rs.size();
  const bool pairwise = variant == LuqVariant::luq_pair;
  const Granularity g = pairwise ? pair_units : granularity_of(variant);

  ConsistencyTable t;
  t.in_pool.resize(m);
  t.units.resize(m);
  t.unit_probabilities.assign(m, std::vector<std::vector<double>>(m));
  t.similarity.assign(m, std::vector<std::optional<double>>(m));
  t.confidence.resize(m);

  std::vector<std::vector<std::string>> premises(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Response& r = rs.member(i);
    t.in_pool[i] = !r.is_refusal && !blank(r);
    if (!t.in_pool[i]) continue;
    t.units[i] = units_of(r, g, splitter);
    premises[i] = premises_for(r, pairwise);
  }

  struct Slot {
    std::size_t i, ref, offset;
  };
  std::vector<TextPair> pairs;
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < m; ++i) {
    if (!t.in_pool[i] || t.units[i].empty()) continue;
    for (std::size_t ref = 0; ref < m; ++ref) {
      if (ref == i || !t.in_pool[ref] || premises[ref].empty()) continue;
      slots.push_back({i, ref, pairs.size()});
      for (const auto& u : t.units[i])
        for (const auto& p : premises[ref]) pairs.push_back({u.text, p});
    }
  }
  if (slots.empty()) throw Error(ErrorCode::all_pairs_unscorable, "no scorable response pairs in " + rs.query.id);

  const auto judged = scorer.score_batch(pairs);
  for (const auto& s : slots) {
    const std::size_t width = premises[s.ref].size();
    auto& probs = t.unit_probabilities[s.i][s.ref];
    for (std::size_t u = 0; u < t.units[s.i].size(); ++u) {
      double best = 0.0;
      for (std::size_t k = 0; k < width; ++k)
        best = std::max(best, entail_probability(judged[s.offset + u * width + k]));
      probs.push_back(best);
    }
    t.similarity[s.i][s.ref] = mean(probs);
  }

  std::vector<double> one_minus_c;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> sims;
    for (std::size_t ref = 0; ref < m; ++ref)
      if (t.similarity[i][ref]) sims.push_back(*t.similarity[i][ref]);
    if (sims.empty()) continue;
    t.confidence[i] = mean(sims);
    one_minus_c.push_back(1.0 - *t.confidence[i]);
  }
  t.uncertainty = mean(one_minus_c);
  return t;
}

double luq_confidence(const ResponseSet& rs, std::size_t member, EntailmentScorer& scorer, LuqVariant variant,
                      ClaimSplitter* splitter) {
  if (member >= rs.size()) throw Error(ErrorCode::invalid_argument, "member index out of range");
  auto t = consistency_table(rs, scorer, variant, splitter);
  if (!t.confidence[member])
    throw Error(ErrorCode::unscorable_pair, "member " + std::to_string(member) + " has no scorable pairs");
  return *t.confidence[member];
}

UncertaintyScore luq_uncertainty(const ResponseSet& rs, EntailmentScorer& scorer, LuqVariant variant,
                                 ClaimSplitter* splitter, Granularity pair_units) {
  auto t = consistency_table(rs, scorer, variant, splitter, pair_units);
  return {method_of(variant), std::clamp(t.uncertainty, 0.0, 1.0), true};
}

UncertaintyScore selfcheck_nli(const ResponseSet& rs, EntailmentScorer& scorer) {
  if (blank(rs.main)) throw Error(ErrorCode::empty_response, "main response is empty");
  if (rs.main.is_refusal) throw Error(ErrorCode::main_refused, "main response of " + rs.query.id + " is a refusal");
  const auto sentences = units_of(rs.main, Granularity::sentence);
  std::vector<const Response*> refs;
  for (const auto& s : rs.samples)
    if (!s.is_refusal && !blank(s)) refs.push_back(&s);
  if (refs.empty()) throw Error(ErrorCode::all_pairs_unscorable, "no usable samples in " + rs.query.id);

  std::vector<TextPair> pairs;
  for (const auto& s : sentences)
    for (const auto* r : refs) pairs.push_back({s.text, r->text});
  const auto judged = scorer.score_batch(pairs);
  std::vector<double> per_sentence;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    double sum = 0.0;
    for (std::size_t r = 0; r < refs.size(); ++r) sum += contradict_probability(judged[k * refs.size() + r]);
    per_sentence.push_back(sum / refs.size());
  }
  return {Method::selfcheck_nli, mean(per_sentence), true};
}

}  // namespace luq
