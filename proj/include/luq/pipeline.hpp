#pragma once

// File-driven pipeline stages behind the `luq` command line.
//
//   sample    dataset            -> samples.jsonl
//   estimate  samples.jsonl      -> scores.jsonl
//   eval      scores + facts     -> report.json, csv/scatter_<model>_<method>.csv
//   ensemble  scores + facts     -> ensemble.json
//   select    scores + facts     -> selective.json
//
// Stages share nothing but files in the output directory. Every output begins
// with a header carrying the config hash, and every stage writes
// manifest_<stage>.json with the verbatim config, counters and failures.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "luq/domain.hpp"
#include "luq/entailment.hpp"
#include "luq/estimators.hpp"
#include "luq/sampling.hpp"

namespace luq {

struct RunConfig {
  std::string dataset;  // queries, one JSON object per line
  std::vector<ProviderConfig> providers;
  std::string scorer = "mock";  // "mock" or the base URL of an NLI service
  std::vector<Method> methods{Method::luq};
  // Applied to every provider; they override per-provider values.
  int n_samples = 10;
  double temperature = 0.7;
  Granularity granularity = Granularity::sentence;  // hypothesis units of luq_pair
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  std::string factuality;  // factuality records, one JSON object per line
  std::string cache_dir;   // defaults to <out_dir>/cache
  std::string splitter = "rule";  // "rule" or "llm" (first provider, rule fallback)
  double entail_threshold = 0.5;
  double ecc_cutoff = 0.9;
  std::size_t scorer_batch = 16;
  bool length_normalize = false;
  bool se_count_fallback = false;
  int workers = 1;
  std::vector<std::string> refusal_patterns = RefusalPolicy::default_patterns();
  int refusal_min_words = 25;
  bool normalize_unbounded = false;
  std::vector<double> selective_grid;  // empty means the default grid
  Method selective_method = Method::luq;
  Method ensemble_method = Method::luq;
  std::vector<std::string> ensemble_priority;
  int retry_backoff_ms = 500;  // first provider retry delay, doubled per attempt
};

void to_json(Json& j, const RunConfig& c);
/// Missing keys keep their defaults. Throws Error(parse) on bad values.
void from_json(const Json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
/// sha256 of the compact config serialization.
std::string config_hash(const RunConfig& c);

/// "mock://synthetic[?world=<seed>&refusal=<threshold>]" or an HTTP endpoint.
std::unique_ptr<ChatProvider> make_provider(const ProviderConfig& cfg, const RetryPolicy& retry = {});
/// "mock" or a base URL.
std::unique_ptr<EntailmentScorer> make_scorer(const std::string& spec);

std::vector<Query> load_dataset(const std::filesystem::path& path);
std::vector<FactualityRecord> load_factuality(const std::filesystem::path& path);

struct EvalFlags {
  bool require_ensemble = false;
  bool require_selective = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

/// Each returns an exit code; fatal errors are also recorded in the manifest.
int cmd_sample(const RunConfig& config);
int cmd_estimate(const RunConfig& config);
int cmd_eval(const RunConfig& config, const EvalFlags& flags = {});
int cmd_ensemble(const RunConfig& config);
int cmd_select(const RunConfig& config);

}  // namespace luq
