#include "luq/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "luq/baselines.hpp"
#include "luq/error.hpp"
#include "luq/evaluation.hpp"
#include "luq/hashing.hpp"
#include "luq/synthetic.hpp"
#include "luq/text.hpp"

namespace luq {

namespace fs = std::filesystem;

namespace {

std::string_view to_string(Granularity g) { return g == Granularity::atomic ? "atomic" : "sentence"; }

Granularity parse_granularity(const std::string& s) {
  if (s == "sentence") return Granularity::sentence;
  if (s == "atomic") return Granularity::atomic;
  throw Error(ErrorCode::parse, "unknown granularity '" + s + "'");
}

Method parse_method_or_throw(const std::string& s) {
  auto m = parse_method(s);
  if (!m) throw Error(ErrorCode::parse, "unknown method '" + s + "'");
  return *m;
}

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::vector<Json> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

Json header(std::string_view kind, const std::string& hash) {
  return Json{{"kind", kind}, {"config_hash", hash}};
}

// Reads a stage output, checks its header kind and returns the records after it.
std::vector<Json> read_stage_file(const fs::path& path, std::string_view kind, std::string* upstream_hash) {
  auto lines = read_jsonl(path);
  if (lines.empty() || !lines.front().contains("header") || lines.front()["header"].value("kind", "") != kind)
    throw Error(ErrorCode::parse, path.string() + ": missing '" + std::string(kind) + "' header");
  if (upstream_hash) *upstream_hash = lines.front()["header"].value("config_hash", "");
  lines.erase(lines.begin());
  return lines;
}

fs::path cache_dir_of(const RunConfig& c) {
  return c.cache_dir.empty() ? fs::path(c.out_dir) / "cache" : fs::path(c.cache_dir);
}

ProviderConfig effective(const ProviderConfig& p, const RunConfig& c) {
  ProviderConfig out = p;
  out.n_samples = c.n_samples;
  out.temperature = c.temperature;
  return out;
}

RetryPolicy retry_of(const RunConfig& c) {
  RetryPolicy r;
  r.initial_backoff = std::chrono::milliseconds(c.retry_backoff_ms);
  return r;
}

std::string file_safe(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '_';
    out.push_back(keep ? ch : '_');
  }
  return out;
}

class Manifest {
 public:
  Manifest(std::string stage, const RunConfig& config) : stage_(std::move(stage)), config_(config) {}

  Json counters = Json::object();
  Json failures = Json::array();

  void failure(const std::string& model_id, const std::string& query_id, const std::string& what, ErrorCode code) {
    Json f{{"code", to_string(code)}, {"message", what}};
    if (!model_id.empty()) f["model_id"] = model_id;
    if (!query_id.empty()) f["query_id"] = query_id;
    failures.push_back(std::move(f));
  }

  int finish(int exit_code) {
    static constexpr std::string_view kStatus[] = {"ok", "fatal", "partial"};
    Json doc{{"header", header("manifest", config_hash(config_))},
             {"stage", stage_},
             {"status", kStatus[exit_code]},
             {"config", config_},
             {"counters", counters},
             {"failures", failures}};
    write_text(fs::path(config_.out_dir) / ("manifest_" + stage_ + ".json"), doc.dump(2) + "\n");
    return exit_code;
  }

  int fatal(const Error& e) {
    failure("", "", e.what(), e.code());
    return finish(kExitFatal);
  }

 private:
  std::string stage_;
  const RunConfig& config_;
};

// ---- estimate --------------------------------------------------------------

struct ScoredRecord {
  std::string query_id;
  std::string model_id;
  FrequencyLabel frequency = FrequencyLabel::unknown;
  bool main_refused = false;
  Json scores = Json::object();
  int errors = 0;
};

ResponseSet response_set_from_record(const Json& j) {
  ResponseSet rs;
  rs.query.id = j.at("query_id").get<std::string>();
  rs.query.entity = j.value("entity", "");
  rs.query.prompt = j.value("prompt", "");
  rs.query.frequency_label = parse_frequency_label(j.value("frequency", ""));
  rs.model_id = j.at("model_id").get<std::string>();
  rs.temperature = j.at("temperature").get<double>();
  rs.main = j.at("main").get<Response>();
  rs.samples = j.at("samples").get<std::vector<Response>>();
  return rs;
}

Json record_of(const ResponseSet& rs) {
  return Json{{"query_id", rs.query.id},
              {"entity", rs.query.entity},
              {"prompt", rs.query.prompt},
              {"frequency", to_string(rs.query.frequency_label)},
              {"model_id", rs.model_id},
              {"temperature", rs.temperature},
              {"main", rs.main},
              {"samples", rs.samples}};
}

ScoredRecord estimate_one(const ResponseSet& rs, const RunConfig& config, EntailmentScorer& scorer,
                          ClaimSplitter& splitter) {
  ScoredRecord out{rs.query.id, rs.model_id, rs.query.frequency_label};
  out.main_refused = rs.main.is_refusal || trim(rs.main.text).empty();
  std::optional<SimilarityMatrix> graph;
  const auto entail_graph = [&]() -> const SimilarityMatrix& {
    if (!graph) graph = similarity_matrix(rs, SimilarityKind::entail_sym, &scorer);
    return *graph;
  };
  for (Method m : config.methods) {
    const std::string name(to_string(m));
    if (out.main_refused) {
      out.scores[name] = Json{{"status", "refused"}};
      continue;
    }
    try {
      UncertaintyScore s;
      switch (m) {
        case Method::luq: s = luq_uncertainty(rs, scorer, LuqVariant::luq, &splitter); break;
        case Method::luq_pair:
          s = luq_uncertainty(rs, scorer, LuqVariant::luq_pair, &splitter, config.granularity);
          break;
        case Method::luq_atomic: s = luq_uncertainty(rs, scorer, LuqVariant::luq_atomic, &splitter); break;
        case Method::selfcheck_nli: s = selfcheck_nli(rs, scorer); break;
        case Method::lexsim: s = lexsim_uncertainty(rs); break;
        case Method::numsets: s = numsets(rs, scorer, config.entail_threshold); break;
        case Method::eigv: s = eigv_uncertainty(entail_graph()); break;
        case Method::deg: s = deg_uncertainty(entail_graph()); break;
        case Method::ecc: s = ecc_uncertainty(entail_graph(), config.ecc_cutoff); break;
        case Method::msp: s = msp(rs); break;
        case Method::mcse: s = mcse(rs, config.length_normalize); break;
        case Method::se:
          s = semantic_entropy(rs, scorer, {config.entail_threshold, config.length_normalize, config.se_count_fallback});
          break;
      }
      out.scores[name] = Json{{"status", "ok"}, {"value", s.value}, {"bounded01", s.bounded01}};
    } catch (const Error& e) {
      out.scores[name] = Json{{"status", "error"}, {"error", to_string(e.code())}, {"message", e.what()}};
      ++out.errors;
    }
  }
  return out;
}

// ---- eval ------------------------------------------------------------------

struct Joined {
  std::vector<std::string> models;  // first-appearance order
  std::map<std::string, std::vector<JoinedRecord>> per_model;
  std::size_t score_records = 0;
  std::size_t unmatched = 0;
};

Joined join_inputs(const RunConfig& config, std::string* upstream_hash) {
  if (config.factuality.empty()) throw Error(ErrorCode::invalid_argument, "no factuality file configured");
  const auto scores = read_stage_file(fs::path(config.out_dir) / "scores.jsonl", "scores", upstream_hash);
  std::map<std::pair<std::string, std::string>, FactualityRecord> facts;
  for (auto& f : load_factuality(config.factuality)) {
    auto key = std::make_pair(f.model_id.value_or(""), f.query_id);
    facts.emplace(std::move(key), std::move(f));
  }
  Joined out;
  for (const auto& j : scores) {
    ++out.score_records;
    JoinedRecord r;
    r.query_id = j.at("query_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    auto it = facts.find({r.model_id, r.query_id});
    if (it == facts.end()) it = facts.find({"", r.query_id});
    if (it == facts.end()) {
      ++out.unmatched;
      continue;
    }
    r.fact = it->second;
    if (j.value("main_refused", false)) {
      r.fact.responded = false;
      r.fact.fs = 0.0;
    }
    r.frequency = r.fact.frequency != FrequencyLabel::unknown ? r.fact.frequency
                                                              : parse_frequency_label(j.value("frequency", ""));
    for (const auto& [name, entry] : j.at("scores").items()) {
      if (entry.value("status", "") != "ok") continue;
      const Method m = parse_method_or_throw(name);
      r.scores[m] = UncertaintyScore{m, entry.at("value").get<double>(), entry.at("bounded01").get<bool>()};
    }
    if (!out.per_model.count(r.model_id)) out.models.push_back(r.model_id);
    out.per_model[r.model_id].push_back(std::move(r));
  }
  if (out.per_model.empty()) throw Error(ErrorCode::join_empty, "no score record matches a factuality record");
  return out;
}

const std::vector<double>& grid_of(const RunConfig& c) {
  return c.selective_grid.empty() ? default_selective_grid() : c.selective_grid;
}

std::vector<std::string> priority_of(const RunConfig& c, const Joined& joined) {
  if (!c.ensemble_priority.empty()) return c.ensemble_priority;
  std::vector<std::string> p;
  for (const auto& p_cfg : c.providers) p.push_back(p_cfg.model_id);
  for (const auto& m : joined.models)
    if (std::find(p.begin(), p.end(), m) == p.end()) p.push_back(m);
  return p;
}

Json ensemble_section(const RunConfig& config, const Joined& joined) {
  if (joined.models.size() < 2) throw Error(ErrorCode::insufficient_data, "ensemble needs at least two models");
  return to_json_value(ensemble_select(joined.per_model, config.ensemble_method, priority_of(config, joined)));
}

std::string scatter_csv(const std::vector<JoinedRecord>& records, Method m, const std::string& hash) {
  std::ostringstream out;
  out.precision(17);
  out << "# config_hash=" << hash << "\n";
  out << "query_id,fs,uncertainty\n";
  for (const auto& r : records) {
    const auto* s = r.score(m);
    if (!r.fact.responded || !s) continue;
    out << r.query_id << ',' << r.fact.fs << ',' << s->value << "\n";
  }
  return out.str();
}

}  // namespace

// ---- config ----------------------------------------------------------------

void to_json(Json& j, const RunConfig& c) {
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  j = Json{{"dataset", c.dataset},
           {"providers", c.providers},
           {"scorer", c.scorer},
           {"methods", methods},
           {"n_samples", c.n_samples},
           {"temperature", c.temperature},
           {"granularity", to_string(c.granularity)},
           {"out_dir", c.out_dir},
           {"seed", c.seed},
           {"factuality", c.factuality},
           {"cache_dir", c.cache_dir},
           {"splitter", c.splitter},
           {"entail_threshold", c.entail_threshold},
           {"ecc_cutoff", c.ecc_cutoff},
           {"scorer_batch", c.scorer_batch},
           {"length_normalize", c.length_normalize},
           {"se_count_fallback", c.se_count_fallback},
           {"workers", c.workers},
           {"refusal", {{"patterns", c.refusal_patterns}, {"min_word_count", c.refusal_min_words}}},
           {"normalize_unbounded", c.normalize_unbounded},
           {"selective", {{"grid", c.selective_grid}, {"method", to_string(c.selective_method)}}},
           {"ensemble", {{"method", to_string(c.ensemble_method)}, {"priority", c.ensemble_priority}}},
           {"retry_backoff_ms", c.retry_backoff_ms}};
}

void from_json(const Json& j, RunConfig& c) {
  try {
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("providers")) c.providers = j.at("providers").get<std::vector<ProviderConfig>>();
    c.scorer = j.value("scorer", c.scorer);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j.at("methods")) c.methods.push_back(parse_method_or_throw(m.get<std::string>()));
    }
    c.n_samples = j.value("n_samples", c.n_samples);
    c.temperature = j.value("temperature", c.temperature);
    if (j.contains("granularity")) c.granularity = parse_granularity(j.at("granularity").get<std::string>());
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.factuality = j.value("factuality", c.factuality);
    c.cache_dir = j.value("cache_dir", c.cache_dir);
    c.splitter = j.value("splitter", c.splitter);
    c.entail_threshold = j.value("entail_threshold", c.entail_threshold);
    c.ecc_cutoff = j.value("ecc_cutoff", c.ecc_cutoff);
    c.scorer_batch = j.value("scorer_batch", c.scorer_batch);
    c.length_normalize = j.value("length_normalize", c.length_normalize);
    c.se_count_fallback = j.value("se_count_fallback", c.se_count_fallback);
    c.workers = j.value("workers", c.workers);
    if (j.contains("refusal")) {
      const auto& r = j.at("refusal");
      if (r.contains("patterns")) c.refusal_patterns = r.at("patterns").get<std::vector<std::string>>();
      c.refusal_min_words = r.value("min_word_count", c.refusal_min_words);
    }
    c.normalize_unbounded = j.value("normalize_unbounded", c.normalize_unbounded);
    if (j.contains("selective")) {
      const auto& s = j.at("selective");
      if (s.contains("grid")) c.selective_grid = s.at("grid").get<std::vector<double>>();
      if (s.contains("method")) c.selective_method = parse_method_or_throw(s.at("method").get<std::string>());
    }
    if (j.contains("ensemble")) {
      const auto& e = j.at("ensemble");
      if (e.contains("method")) c.ensemble_method = parse_method_or_throw(e.at("method").get<std::string>());
      if (e.contains("priority")) c.ensemble_priority = e.at("priority").get<std::vector<std::string>>();
    }
    c.retry_backoff_ms = j.value("retry_backoff_ms", c.retry_backoff_ms);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, std::string("run config: ") + e.what());
  }
  if (c.n_samples < 1) throw Error(ErrorCode::parse, "run config: n_samples must be >= 1");
  if (!(c.temperature > 0.0)) throw Error(ErrorCode::parse, "run config: temperature must be > 0");
  if (c.workers < 1) throw Error(ErrorCode::parse, "run config: workers must be >= 1");
  if (c.scorer_batch < 1) throw Error(ErrorCode::parse, "run config: scorer_batch must be >= 1");
  if (c.splitter != "rule" && c.splitter != "llm") throw Error(ErrorCode::parse, "run config: splitter is rule or llm");
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

std::string config_hash(const RunConfig& c) { return sha256_hex(Json(c).dump()); }

// ---- factories and inputs --------------------------------------------------

std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& cfg, const RetryPolicy& retry) {
  constexpr std::string_view kMock = "mock://synthetic";
  const std::string& url = cfg.endpoint_url;
  if (url.rfind(kMock, 0) != 0) return std::make_unique<HttpChatProvider>(cfg, retry);
  std::uint64_t world = 7;
  double refusal = 0.12;
  const auto q = url.find('?');
  if (q != std::string::npos) {
    std::istringstream params(url.substr(q + 1));
    std::string kv;
    while (std::getline(params, kv, '&')) {
      const auto eq = kv.find('=');
      const std::string key = kv.substr(0, eq);
      const std::string value = eq == std::string::npos ? "" : kv.substr(eq + 1);
      try {
        if (key == "world") world = std::stoull(value);
        else if (key == "refusal") refusal = std::stod(value);
        else throw Error(ErrorCode::invalid_argument, "unknown mock provider parameter '" + key + "'");
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::invalid_argument, "bad mock provider parameter '" + kv + "'");
      }
    }
  }
  return std::make_unique<synthetic::SyntheticProvider>(synthetic::World(world, refusal));
}

std::unique_ptr<EntailmentScorer> make_scorer(const std::string& spec) {
  if (spec == "mock") return std::make_unique<MockScorer>();
  return std::make_unique<RemoteScorer>(spec);
}

std::vector<Query> load_dataset(const fs::path& path) {
  std::vector<Query> out;
  std::set<std::string> seen;
  for (const auto& j : read_jsonl(path)) {
    Query q;
    try {
      q = j.get<Query>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse, path.string() + ": " + e.what());
    }
    if (trim(q.prompt).empty()) q.prompt = bio_prompt(q.entity);
    if (q.id.empty()) throw Error(ErrorCode::parse, path.string() + ": query without id");
    if (!seen.insert(q.id).second) throw Error(ErrorCode::parse, path.string() + ": duplicate query id " + q.id);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<FactualityRecord> load_factuality(const fs::path& path) {
  std::vector<FactualityRecord> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      out.push_back(j.get<FactualityRecord>());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse, path.string() + ": " + e.what());
    }
  }
  return out;
}

// ---- stages ----------------------------------------------------------------

int cmd_sample(const RunConfig& config) {
  Manifest manifest("sample", config);
  try {
    const auto hash = config_hash(config);
    const auto queries = load_dataset(config.dataset);
    if (config.providers.empty()) throw Error(ErrorCode::invalid_argument, "no providers configured");
    const RefusalPolicy policy(config.refusal_patterns, config.refusal_min_words);
    fs::create_directories(cache_dir_of(config));
    GenerationCache cache(cache_dir_of(config) / "generations.jsonl");

    std::string body = Json{{"header", header("samples", hash)}}.dump() + "\n";
    GenerationStats stats;
    std::size_t written = 0;
    for (const auto& p : config.providers) {
      const ProviderConfig cfg = effective(p, config);
      auto provider = make_provider(cfg, retry_of(config));
      for (const auto& q : queries) {
        try {
          auto rs = generate_response_set(q, cfg, policy, *provider, cache, config.seed, &stats);
          body += record_of(rs).dump() + "\n";
          ++written;
        } catch (const Error& e) {
          manifest.failure(cfg.model_id, q.id, e.what(), e.code());
        }
      }
    }
    write_text(fs::path(config.out_dir) / "samples.jsonl", body);
    manifest.counters = Json{{"queries", queries.size()},
                             {"providers", config.providers.size()},
                             {"records", written},
                             {"failed", manifest.failures.size()},
                             {"cache_hits", stats.cache_hits},
                             {"provider_calls", stats.provider_calls}};
    if (written == 0) return manifest.finish(kExitFatal);
    return manifest.finish(manifest.failures.empty() ? kExitOk : kExitPartial);
  } catch (const Error& e) {
    return manifest.fatal(e);
  }
}

int cmd_estimate(const RunConfig& config) {
  Manifest manifest("estimate", config);
  try {
    const auto hash = config_hash(config);
    std::string upstream;
    const auto lines = read_stage_file(fs::path(config.out_dir) / "samples.jsonl", "samples", &upstream);
    std::vector<ResponseSet> sets;
    for (const auto& j : lines) {
      try {
        sets.push_back(response_set_from_record(j));
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::parse, std::string("samples.jsonl: ") + e.what());
      }
    }

    fs::create_directories(cache_dir_of(config));
    auto base = make_scorer(config.scorer);
    JudgmentCache judgments(cache_dir_of(config) / "judgments.jsonl");
    CachedScorer scorer(*base, judgments, config.scorer_batch);

    std::shared_ptr<ClaimSplitter> rules = std::make_shared<RuleClaimSplitter>();
    std::unique_ptr<ChatProvider> claim_provider;
    std::unique_ptr<GenerationCache> claim_cache;
    std::shared_ptr<ClaimSplitter> splitter = rules;
    if (config.splitter == "llm") {
      if (config.providers.empty()) throw Error(ErrorCode::invalid_argument, "llm splitter needs a provider");
      claim_provider = make_provider(config.providers.front(), retry_of(config));
      claim_cache = std::make_unique<GenerationCache>(cache_dir_of(config) / "claims.jsonl");
      splitter = std::make_shared<LlmClaimSplitter>(*claim_provider, config.providers.front().model_id,
                                                    claim_cache.get(), rules);
    }

    std::vector<ScoredRecord> results(sets.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
      for (std::size_t i = next++; i < sets.size(); i = next++)
        results[i] = estimate_one(sets[i], config, scorer, *splitter);
    };
    {
      std::vector<std::jthread> pool;
      const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), sets.size());
      for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(work);
      work();
    }

    std::string body = Json{{"header", header("scores", hash)}}.dump() + "\n";
    std::size_t ok = 0, refused = 0, errors = 0;
    for (const auto& r : results) {
      body += Json{{"query_id", r.query_id},
                   {"model_id", r.model_id},
                   {"frequency", to_string(r.frequency)},
                   {"main_refused", r.main_refused},
                   {"scores", r.scores}}
                  .dump() +
              "\n";
      for (const auto& [name, entry] : r.scores.items()) {
        const auto status = entry.value("status", "");
        if (status == "ok") ++ok;
        else if (status == "refused") ++refused;
        else {
          ++errors;
          manifest.failures.push_back(Json{{"code", entry.value("error", "")},
                                           {"message", entry.value("message", "")},
                                           {"model_id", r.model_id},
                                           {"query_id", r.query_id},
                                           {"method", name}});
        }
      }
    }
    write_text(fs::path(config.out_dir) / "scores.jsonl", body);
    const auto& st = scorer.stats();
    manifest.counters = Json{{"records", results.size()},
                             {"samples_config_hash", upstream},
                             {"scores_ok", ok},
                             {"scores_refused", refused},
                             {"scores_failed", errors},
                             {"scorer_calls", st.scorer_calls.load()},
                             {"pairs_scored", st.pairs_scored.load()},
                             {"cache_hits", st.cache_hits.load()},
                             {"truncations", st.truncations.load()}};
    if (errors > 0 && ok == 0 && refused == 0) return manifest.finish(kExitFatal);
    return manifest.finish(errors == 0 ? kExitOk : kExitPartial);
  } catch (const Error& e) {
    return manifest.fatal(e);
  }
}

int cmd_eval(const RunConfig& config, const EvalFlags& flags) {
  Manifest manifest("eval", config);
  try {
    const auto hash = config_hash(config);
    std::string upstream;
    const Joined joined = join_inputs(config, &upstream);
    const AggregateOptions agg_options{config.normalize_unbounded, false};

    Json per_question = Json::array();
    Json correlations = Json::object();
    Json aggregates = Json::object();
    Json frequency = Json::object();
    Json curves = Json::object();
    Json notes = Json::array();
    std::map<std::string, std::string> csvs;

    for (const auto& model : joined.models) {
      const auto& records = joined.per_model.at(model);
      for (const auto& r : records) {
        Json scores = Json::object();
        for (Method m : config.methods)
          if (const auto* s = r.score(m)) scores[std::string(to_string(m))] = s->value;
        per_question.push_back(Json{{"query_id", r.query_id},
                                    {"model_id", r.model_id},
                                    {"fs", r.fact.fs},
                                    {"responded", r.fact.responded},
                                    {"frequency", to_string(r.frequency)},
                                    {"scores", scores}});
      }

      Json rows = Json::array();
      for (const auto& row : correlation_report(records, config.methods)) rows.push_back(to_json_value(row));
      correlations[model] = rows;

      Json agg = Json::object();
      Json freq = Json::object();
      Json model_curves = Json::array();
      for (Method m : config.methods) {
        const std::string name(to_string(m));
        try {
          agg[name] = to_json_value(penalized_aggregates(records, m, agg_options));
        } catch (const Error& e) {
          agg[name] = Json{{"note", e.what()}};
        }
        try {
          freq[name] = to_json_value(frequency_report(records, m));
        } catch (const Error& e) {
          freq[name] = Json{{"note", e.what()}};
        }
        try {
          model_curves.push_back(to_json_value(selective_curve(records, m, grid_of(config))));
        } catch (const Error& e) {
          if (flags.require_selective && m == config.selective_method) throw;
          notes.push_back(model + "/" + name + " selective curve: " + e.what());
        }
        csvs["scatter_" + file_safe(model) + "_" + name + ".csv"] = scatter_csv(records, m, hash);
      }
      aggregates[model] = agg;
      frequency[model] = freq;
      curves[model] = model_curves;
    }

    Json ensemble = nullptr;
    try {
      ensemble = ensemble_section(config, joined);
    } catch (const Error& e) {
      if (flags.require_ensemble) throw;
      notes.push_back(std::string("ensemble: ") + e.what());
    }

    Json report{{"header", header("report", hash)},
                {"per_question", per_question},
                {"correlations", correlations},
                {"aggregates", aggregates},
                {"frequency", frequency},
                {"selective_curves", curves},
                {"ensemble", ensemble},
                {"notes", notes}};
    write_text(fs::path(config.out_dir) / "report.json", report.dump(2) + "\n");
    for (const auto& [name, text] : csvs) write_text(fs::path(config.out_dir) / "csv" / name, text);

    manifest.counters = Json{{"score_records", joined.score_records},
                             {"joined", joined.score_records - joined.unmatched},
                             {"unmatched", joined.unmatched},
                             {"models", joined.models},
                             {"scores_config_hash", upstream}};
    for (const auto& n : notes) manifest.failures.push_back(Json{{"code", "note"}, {"message", n}});
    return manifest.finish(joined.unmatched == 0 ? kExitOk : kExitPartial);
  } catch (const Error& e) {
    return manifest.fatal(e);
  }
}

int cmd_ensemble(const RunConfig& config) {
  Manifest manifest("ensemble", config);
  try {
    const auto hash = config_hash(config);
    const Joined joined = join_inputs(config, nullptr);
    Json doc{{"header", header("ensemble", hash)}, {"ensemble", ensemble_section(config, joined)}};
    write_text(fs::path(config.out_dir) / "ensemble.json", doc.dump(2) + "\n");
    manifest.counters = Json{{"models", joined.models}, {"unmatched", joined.unmatched}};
    return manifest.finish(joined.unmatched == 0 ? kExitOk : kExitPartial);
  } catch (const Error& e) {
    return manifest.fatal(e);
  }
}

int cmd_select(const RunConfig& config) {
  Manifest manifest("select", config);
  try {
    const auto hash = config_hash(config);
    const Joined joined = join_inputs(config, nullptr);
    Json curves = Json::object();
    for (const auto& model : joined.models)
      curves[model] = to_json_value(selective_curve(joined.per_model.at(model), config.selective_method, grid_of(config)));
    Json doc{{"header", header("selective", hash)}, {"selective_curves", curves}};
    write_text(fs::path(config.out_dir) / "selective.json", doc.dump(2) + "\n");
    manifest.counters = Json{{"models", joined.models}, {"unmatched", joined.unmatched}};
    return manifest.finish(joined.unmatched == 0 ? kExitOk : kExitPartial);
  } catch (const Error& e) {
    return manifest.fatal(e);
  }
}

}  // namespace luq
