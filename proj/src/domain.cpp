#include "luq/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include "luq/error.hpp"

namespace luq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::empty_entity: return "empty-entity";
    case ErrorCode::provider_unreachable: return "provider-unreachable";
    case ErrorCode::auth_failure: return "auth-failure";
    case ErrorCode::malformed_provider_reply: return "malformed-provider-reply";
    case ErrorCode::invalid_regex: return "invalid-regex";
    case ErrorCode::splitter_unavailable: return "splitter-unavailable";
    case ErrorCode::non_finite_logit: return "non-finite-logit";
    case ErrorCode::scorer_unavailable: return "scorer-unavailable";
    case ErrorCode::empty_response: return "empty-response";
    case ErrorCode::unscorable_pair: return "unscorable-pair";
    case ErrorCode::all_pairs_unscorable: return "all-pairs-unscorable";
    case ErrorCode::main_refused: return "main-refused";
    case ErrorCode::missing_logprobs: return "missing-logprobs";
    case ErrorCode::zero_row_sum: return "zero-row-sum";
    case ErrorCode::constant_input: return "constant-input";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::unbounded_method_for_pus: return "unbounded-method-for-PUS";
    case ErrorCode::coverage_gap: return "coverage-gap";
    case ErrorCode::empty_retained_set: return "empty-retained-set";
    case ErrorCode::all_unknown: return "all-unknown";
    case ErrorCode::join_empty: return "join-empty";
  }
  return "unknown";
}

namespace {

constexpr std::array<std::pair<FrequencyLabel, std::string_view>, 6> kFrequencyNames{{
    {FrequencyLabel::very_rare, "very_rare"},
    {FrequencyLabel::rare, "rare"},
    {FrequencyLabel::medium, "medium"},
    {FrequencyLabel::frequent, "frequent"},
    {FrequencyLabel::very_frequent, "very_frequent"},
    {FrequencyLabel::unknown, "unknown"},
}};

constexpr std::array<std::pair<Method, std::string_view>, 12> kMethodNames{{
    {Method::luq, "luq"},
    {Method::luq_pair, "luq_pair"},
    {Method::luq_atomic, "luq_atomic"},
    {Method::selfcheck_nli, "selfcheck_nli"},
    {Method::lexsim, "lexsim"},
    {Method::numsets, "numsets"},
    {Method::eigv, "eigv"},
    {Method::deg, "deg"},
    {Method::ecc, "ecc"},
    {Method::msp, "msp"},
    {Method::mcse, "mcse"},
    {Method::se, "se"},
}};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void check_response(const Response& r, const std::string& path, std::vector<Violation>& out) {
  if (r.token_logprobs) {
    for (std::size_t t = 0; t < r.token_logprobs->size(); ++t) {
      double lp = (*r.token_logprobs)[t];
      if (std::isnan(lp)) {
        out.push_back({path + ".token_logprobs[" + std::to_string(t) + "]", "logprob is NaN"});
      } else if (lp > 0.0) {
        out.push_back({path + ".token_logprobs[" + std::to_string(t) + "]", "logprob > 0"});
      }
    }
  }
  for (const auto& s : r.sentences) {
    if (is_blank(s.text)) out.push_back({path + ".sentences[" + std::to_string(s.index) + "]", "empty text"});
    if (s.index < 0) out.push_back({path + ".sentences", "negative index"});
  }
  if (r.atomic_claims) {
    for (const auto& a : *r.atomic_claims) {
      if (is_blank(a.text)) out.push_back({path + ".atomic_claims[" + std::to_string(a.index) + "]", "empty text"});
      if (a.index < 0) out.push_back({path + ".atomic_claims", "negative index"});
    }
  }
}

}  // namespace

std::string_view to_string(FrequencyLabel label) {
  for (const auto& [l, name] : kFrequencyNames)
    if (l == label) return name;
  return "unknown";
}

FrequencyLabel parse_frequency_label(std::string_view text) {
  std::string norm;
  for (char c : text) norm.push_back(c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(c)));
  for (const auto& [l, name] : kFrequencyNames)
    if (name == norm) return l;
  return FrequencyLabel::unknown;
}

std::string_view to_string(Method method) {
  for (const auto& [m, name] : kMethodNames)
    if (m == method) return name;
  return "luq";
}

std::optional<Method> parse_method(std::string_view text) {
  for (const auto& [m, name] : kMethodNames)
    if (name == text) return m;
  return std::nullopt;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& [m, _] : kMethodNames) v.push_back(m);
    return v;
  }();
  return methods;
}

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto first = std::find_if_not(text.begin(), text.end(), is_space);
  auto last = std::find_if_not(text.rbegin(), text.rend(), is_space).base();
  if (first >= last) return {};
  return std::string(first, last);
}

SimilarityMatrix SimilarityMatrix::identity(std::size_t m) {
  SimilarityMatrix s(m);
  for (std::size_t i = 0; i < m; ++i) s(i, i) = 1.0;
  return s;
}

SimilarityMatrix SimilarityMatrix::ones(std::size_t m) { return SimilarityMatrix(m, 1.0); }

SimilarityMatrix SimilarityMatrix::from_blocks(const std::vector<int>& labels) {
  SimilarityMatrix s(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j) s(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  return s;
}

std::vector<Violation> validate_response_set(const ResponseSet& rs) {
  std::vector<Violation> out;
  if (rs.query.id.empty()) out.push_back({"query.id", "empty id"});
  if (is_blank(rs.query.prompt)) out.push_back({"query.prompt", "empty prompt"});
  if (rs.samples.empty()) out.push_back({"samples", "need n ≥ 1"});
  if (!(rs.temperature > 0.0 && rs.temperature <= 2.0)) out.push_back({"temperature", "must lie in (0, 2]"});
  check_response(rs.main, "main", out);
  for (std::size_t i = 0; i < rs.samples.size(); ++i) check_response(rs.samples[i], "samples[" + std::to_string(i) + "]", out);
  return out;
}

std::vector<Violation> validate_similarity_matrix(const SimilarityMatrix& s) {
  std::vector<Violation> out;
  const std::size_t m = s.size();
  if (m < 2) out.push_back({"m", "need m ≥ 2"});
  for (std::size_t i = 0; i < m; ++i) {
    if (s(i, i) != 1.0) out.push_back({"entries[" + std::to_string(i) + "][" + std::to_string(i) + "]", "diagonal must be 1"});
    for (std::size_t j = 0; j < m; ++j) {
      double v = s(i, j);
      if (!(v >= 0.0 && v <= 1.0))
        out.push_back({"entries[" + std::to_string(i) + "][" + std::to_string(j) + "]", "outside [0,1]"});
      if (j > i && std::abs(v - s(j, i)) > 1e-9)
        out.push_back({"entries[" + std::to_string(i) + "][" + std::to_string(j) + "]", "not symmetric"});
    }
  }
  return out;
}

// --- serialization -------------------------------------------------------

void to_json(Json& j, const Query& q) {
  j = Json{{"id", q.id}, {"entity", q.entity}, {"prompt", q.prompt}, {"frequency", to_string(q.frequency_label)}};
}

void from_json(const Json& j, Query& q) {
  q.id = j.contains("id") ? j.at("id").get<std::string>() : j.at("query_id").get<std::string>();
  q.entity = j.value("entity", std::string{});
  q.prompt = j.value("prompt", std::string{});
  q.frequency_label = parse_frequency_label(j.value("frequency", std::string{}));
}

void to_json(Json& j, const TextUnit& u) { j = Json{{"text", u.text}, {"index", u.index}}; }

void from_json(const Json& j, TextUnit& u) {
  u.text = j.at("text").get<std::string>();
  u.index = j.at("index").get<int>();
}

void to_json(Json& j, const Response& r) {
  j = Json{{"text", r.text}, {"is_refusal", r.is_refusal}};
  if (!r.sentences.empty()) j["sentences"] = r.sentences;
  if (r.atomic_claims) j["atomic_claims"] = *r.atomic_claims;
  if (r.token_logprobs) j["token_logprobs"] = *r.token_logprobs;
}

void from_json(const Json& j, Response& r) {
  r.text = j.at("text").get<std::string>();
  r.is_refusal = j.value("is_refusal", false);
  r.sentences = j.contains("sentences") ? j.at("sentences").get<std::vector<Sentence>>() : std::vector<Sentence>{};
  r.atomic_claims.reset();
  if (j.contains("atomic_claims")) r.atomic_claims = j.at("atomic_claims").get<std::vector<AtomicClaim>>();
  r.token_logprobs.reset();
  if (j.contains("token_logprobs") && !j.at("token_logprobs").is_null())
    r.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
}

void to_json(Json& j, const ResponseSet& rs) {
  j = Json{{"query", rs.query},
           {"model_id", rs.model_id},
           {"temperature", rs.temperature},
           {"main", rs.main},
           {"samples", rs.samples}};
}

void from_json(const Json& j, ResponseSet& rs) {
  rs.query = j.at("query").get<Query>();
  rs.model_id = j.at("model_id").get<std::string>();
  rs.temperature = j.at("temperature").get<double>();
  rs.main = j.at("main").get<Response>();
  rs.samples = j.at("samples").get<std::vector<Response>>();
}

void to_json(Json& j, const UncertaintyScore& s) {
  j = Json{{"method", to_string(s.method)}, {"value", s.value}, {"bounded01", s.bounded01}};
}

void from_json(const Json& j, UncertaintyScore& s) {
  auto name = j.at("method").get<std::string>();
  auto m = parse_method(name);
  if (!m) throw Error(ErrorCode::parse, "unknown method '" + name + "'");
  s.method = *m;
  s.value = j.at("value").get<double>();
  s.bounded01 = j.at("bounded01").get<bool>();
}

void to_json(Json& j, const FactualityRecord& f) {
  j = Json{{"query_id", f.query_id}, {"fs", f.fs}, {"responded", f.responded}};
  if (f.num_facts) j["num_facts"] = *f.num_facts;
  if (f.frequency != FrequencyLabel::unknown) j["frequency"] = to_string(f.frequency);
  if (f.model_id) j["model_id"] = *f.model_id;
}

void from_json(const Json& j, FactualityRecord& f) {
  f.query_id = j.at("query_id").get<std::string>();
  f.fs = j.value("fs", 0.0);
  f.responded = j.value("responded", true);
  f.num_facts.reset();
  if (j.contains("num_facts") && !j.at("num_facts").is_null()) f.num_facts = j.at("num_facts").get<int>();
  f.frequency = parse_frequency_label(j.value("frequency", std::string{}));
  f.model_id.reset();
  if (j.contains("model_id") && !j.at("model_id").is_null()) f.model_id = j.at("model_id").get<std::string>();
  if (f.responded && !(f.fs >= 0.0 && f.fs <= 1.0))
    throw Error(ErrorCode::parse, "fs for '" + f.query_id + "' must be a fraction in [0,1]");
}

}  // namespace luq
