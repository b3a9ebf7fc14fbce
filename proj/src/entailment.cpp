#include "luq/entailment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "httplib.h"
#include "luq/hashing.hpp"

namespace luq {

namespace {

void require_finite(const EntailmentJudgment& j) {
  if (!std::isfinite(j.entail) || !std::isfinite(j.contradict) || !std::isfinite(j.neutral))
    throw Error(ErrorCode::non_finite_logit, "judgment logits must be finite");
}

// Probability of the class with logit `a` against the class with logit `b`.
double two_class(double a, double b) {
  const double d = b - a;
  if (d >= 0.0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

}  // namespace

double entail_probability(const EntailmentJudgment& j) {
  require_finite(j);
  return two_class(j.entail, j.contradict);
}

double contradict_probability(const EntailmentJudgment& j) {
  require_finite(j);
  return two_class(j.contradict, j.entail);
}

// --- mock scorer ------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> set{
      "a",     "an",    "the",  "of",    "in",    "on",    "at",    "to",     "for",   "with",  "by",
      "from",  "and",   "or",   "but",   "as",    "is",    "was",   "were",   "are",   "be",    "been",
      "being", "he",    "she",  "it",    "they",  "his",   "her",   "their",  "its",   "this",  "that",
      "these", "those", "which", "who",  "whom",  "also",  "has",   "had",    "have",  "after", "before",
      "during", "into", "about", "over", "under", "than",  "then",  "there",  "where", "when",  "while",
      "i",     "we",    "you",  "him",   "them",  "our",   "your",  "my",     "s",     "very",  "such",
  };
  return set;
}

std::vector<std::string> tokenize(std::string_view text) {
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

bool is_number(const std::string& w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Kind of a value token, or empty for ordinary words.
std::string value_kind(const std::string& w) {
  if (is_number(w)) return "number";
  const auto& table = MockScorer::value_table();
  auto it = table.find(w);
  return it == table.end() ? std::string{} : it->second;
}

struct Analysis {
  std::unordered_set<std::string> content;
  // (head, kind) -> values attached
  std::unordered_map<std::string, std::unordered_set<std::string>> attached;
  std::vector<std::pair<std::string, std::string>> values;  // (key, value) in order
};

Analysis analyse(std::string_view text) {
  Analysis a;
  std::string head;
  for (auto& w : tokenize(text)) {
    if (stopwords().contains(w)) continue;
    a.content.insert(w);
    std::string kind = value_kind(w);
    if (kind.empty()) {
      head = w;
      continue;
    }
    if (head.empty()) continue;
    std::string key = head + '\x1f' + kind;
    a.attached[key].insert(w);
    a.values.emplace_back(std::move(key), w);
  }
  return a;
}

}  // namespace

const std::unordered_map<std::string, std::string>& MockScorer::value_table() {
  static const std::unordered_map<std::string, std::string> table = [] {
    std::unordered_map<std::string, std::string> t;
    for (const char* w : {"physicist", "chemist", "painter", "composer", "novelist", "poet", "architect", "surgeon",
                          "engineer", "mathematician", "historian", "economist", "sculptor", "philosopher",
                          "astronomer", "biologist", "lawyer", "diplomat", "journalist", "photographer"})
      t.emplace(w, "profession");
    for (const char* w : {"london", "paris", "berlin", "vienna", "rome", "madrid", "lisbon", "prague", "warsaw",
                          "oslo", "stockholm", "dublin", "athens", "cairo", "boston", "chicago", "toronto", "sydney",
                          "tokyo", "mumbai"})
      t.emplace(w, "city");
    for (const char* w : {"january", "february", "march", "april", "may", "june", "july", "august", "september",
                          "october", "november", "december"})
      t.emplace(w, "month");
    return t;
  }();
  return table;
}

EntailmentJudgment MockScorer::judge(std::string_view hypothesis, std::string_view premise) {
  const Analysis h = analyse(hypothesis);
  const Analysis p = analyse(premise);
  for (const auto& [key, value] : h.values) {
    auto it = p.attached.find(key);
    if (it != p.attached.end() && !it->second.contains(value)) return kContradict;
  }
  const bool covered =
      std::all_of(h.content.begin(), h.content.end(), [&](const std::string& w) { return p.content.contains(w); });
  return covered ? kEntail : kNeutral;
}

std::vector<EntailmentJudgment> MockScorer::score_batch(std::span<const TextPair> pairs) {
  std::vector<EntailmentJudgment> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(judge(p.hypothesis, p.premise));
  return out;
}

// --- remote scorer ------------------------------------------------------------

RemoteScorer::RemoteScorer(std::string base_url) : RemoteScorer(std::move(base_url), Options{}) {}

RemoteScorer::RemoteScorer(std::string base_url, Options options)
    : base_url_(std::move(base_url)), options_(options), in_flight_(std::max<std::ptrdiff_t>(1, options.max_in_flight)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (options_.max_batch == 0) options_.max_batch = 1;
}

Json RemoteScorer::build_request_body(std::span<const TextPair> pairs) {
  Json arr = Json::array();
  for (const auto& p : pairs) arr.push_back(Json{{"premise", p.premise}, {"hypothesis", p.hypothesis}});
  return Json{{"pairs", std::move(arr)}};
}

std::vector<EntailmentJudgment> RemoteScorer::parse_response(std::string_view body, std::size_t expected) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("results") || !j["results"].is_array())
    throw Error(ErrorCode::scorer_unavailable, "scorer reply lacks a results array");
  const auto& results = j["results"];
  if (results.size() != expected)
    throw Error(ErrorCode::scorer_unavailable, "scorer returned " + std::to_string(results.size()) +
                                                   " results for " + std::to_string(expected) + " pairs");
  std::vector<EntailmentJudgment> out;
  out.reserve(expected);
  try {
    for (const auto& r : results)
      out.push_back({r.at("entail").get<double>(), r.at("neutral").get<double>(), r.at("contradict").get<double>()});
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::scorer_unavailable, std::string("malformed result: ") + e.what());
  }
  return out;
}

std::string RemoteScorer::health() const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout));
  auto res = client.Get("/healthz");
  if (!res) throw Error(ErrorCode::scorer_unavailable, base_url_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::scorer_unavailable, "healthz answered HTTP " + std::to_string(res->status));
  Json j = Json::parse(res->body, nullptr, false);
  if (j.is_discarded() || j.value("status", std::string{}) != "ok")
    throw Error(ErrorCode::scorer_unavailable, "healthz status is not ok");
  return j.value("model_id", std::string{});
}

std::string RemoteScorer::id() const {
  std::lock_guard lock(id_mutex_);
  if (!model_id_) {
    try {
      model_id_ = health();
    } catch (const Error&) {
      return "remote:" + base_url_;
    }
  }
  return "remote:" + *model_id_;
}

std::vector<EntailmentJudgment> RemoteScorer::score_batch(std::span<const TextPair> pairs) {
  std::vector<EntailmentJudgment> out;
  out.reserve(pairs.size());
  httplib::Client client(base_url_);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  for (std::size_t start = 0; start < pairs.size(); start += options_.max_batch) {
    auto chunk = pairs.subspan(start, std::min(options_.max_batch, pairs.size() - start));
    in_flight_.acquire();
    auto res = client.Post("/v1/nli", build_request_body(chunk).dump(), "application/json");
    in_flight_.release();
    if (!res) throw Error(ErrorCode::scorer_unavailable, base_url_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw Error(ErrorCode::scorer_unavailable, "/v1/nli answered HTTP " + std::to_string(res->status));
    auto part = parse_response(res->body, chunk.size());
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// --- cache ------------------------------------------------------------------

JudgmentCache::JudgmentCache(std::filesystem::path file) : path_(std::move(file)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::ifstream in(path_); in) {
    std::string line;
    while (std::getline(in, line)) {
      Json j = Json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("key")) continue;
      entries_.try_emplace(j["key"].get<std::string>(),
                           EntailmentJudgment{j.at("entail").get<double>(), j.at("neutral").get<double>(),
                                              j.at("contradict").get<double>()});
    }
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(ErrorCode::io, "cannot open judgment cache " + path_.string());
}

std::string JudgmentCache::key(const TextPair& pair, std::string_view scorer_id) {
  return sha256_hex(Json::array({pair.hypothesis, pair.premise, scorer_id}).dump());
}

std::optional<EntailmentJudgment> JudgmentCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void JudgmentCache::put(const std::string& key, const EntailmentJudgment& j) {
  std::unique_lock lock(mutex_);
  if (!entries_.emplace(key, j).second) return;
  if (out_.is_open()) {
    out_ << Json{{"key", key}, {"entail", j.entail}, {"neutral", j.neutral}, {"contradict", j.contradict}}.dump()
         << '\n';
    out_.flush();
  }
}

std::size_t JudgmentCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

namespace {

// Cut to at most `limit` bytes without splitting a UTF-8 sequence.
std::string truncate_tail(const std::string& s, std::size_t limit) {
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut);
}

}  // namespace

std::vector<EntailmentJudgment> score_cached(EntailmentScorer& scorer, std::span<const TextPair> pairs,
                                             JudgmentCache& cache, std::size_t batch_size, GatewayStats* stats) {
  if (batch_size == 0) batch_size = 1;
  const std::string scorer_id = scorer.id();
  const auto limit = scorer.max_premise_length();

  std::vector<std::optional<EntailmentJudgment>> results(pairs.size());
  std::vector<TextPair> prepared;
  std::vector<std::string> keys(pairs.size());
  prepared.reserve(pairs.size());
  std::vector<std::size_t> misses;
  long truncated = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    TextPair p = pairs[i];
    if (limit && p.premise.size() > *limit) {
      p.premise = truncate_tail(p.premise, *limit);
      ++truncated;
    }
    keys[i] = JudgmentCache::key(p, scorer_id);
    if (auto hit = cache.find(keys[i])) {
      results[i] = *hit;
    } else {
      misses.push_back(i);
    }
    prepared.push_back(std::move(p));
  }
  if (stats) {
    stats->cache_hits += static_cast<long>(pairs.size() - misses.size());
    stats->truncations += truncated;
  }

  // Identical misses within one call are scored once.
  std::vector<std::size_t> unique_misses;
  {
    std::unordered_map<std::string, std::size_t> seen;
    for (auto i : misses)
      if (seen.emplace(keys[i], i).second) unique_misses.push_back(i);
  }

  for (std::size_t start = 0; start < unique_misses.size(); start += batch_size) {
    const std::size_t end = std::min(unique_misses.size(), start + batch_size);
    std::vector<TextPair> batch;
    for (std::size_t k = start; k < end; ++k) batch.push_back(prepared[unique_misses[k]]);
    std::vector<EntailmentJudgment> scored;
    try {
      scored = scorer.score_batch(batch);
      if (scored.size() != batch.size()) throw Error(ErrorCode::scorer_unavailable, "scorer changed batch length");
    } catch (const std::exception& e) {
      std::vector<std::size_t> unscored;
      for (std::size_t i = 0; i < pairs.size(); ++i)
        if (!results[i] && !cache.find(keys[i])) unscored.push_back(i);
      std::string what = std::to_string(unscored.size()) + " of " + std::to_string(pairs.size()) +
                         " pairs remain unscored: " + e.what();
      throw UnscoredPairsError(std::move(unscored), what);
    }
    if (stats) {
      ++stats->scorer_calls;
      stats->pairs_scored += static_cast<long>(batch.size());
    }
    for (std::size_t k = start; k < end; ++k) cache.put(keys[unique_misses[k]], scored[k - start]);
  }

  std::vector<EntailmentJudgment> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (results[i]) {
      out.push_back(*results[i]);
    } else {
      auto j = cache.find(keys[i]);
      if (!j) throw Error(ErrorCode::scorer_unavailable, "judgment missing after scoring");
      out.push_back(*j);
    }
  }
  return out;
}

}  // namespace luq
