// luq: sample | estimate | eval | ensemble | select
//
// Flags given on the command line override the matching config keys.
// Exit codes: 0 success, 2 partial (some questions failed), 1 fatal.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "luq/error.hpp"
#include "luq/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string methods;
  std::optional<int> n;
  std::optional<double> temperature;
  std::string scorer;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string factuality;
  bool ensemble = false;
  bool selective = false;
};

std::vector<luq::Method> parse_methods_csv(const std::string& csv) {
  std::vector<luq::Method> out;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = luq::trim(item);
    if (item.empty()) continue;
    auto m = luq::parse_method(item);
    if (!m) throw luq::Error(luq::ErrorCode::invalid_argument, "unknown method '" + item + "'");
    out.push_back(*m);
  }
  if (out.empty()) throw luq::Error(luq::ErrorCode::invalid_argument, "--methods is empty");
  return out;
}

luq::RunConfig resolve(const Overrides& o) {
  luq::RunConfig c = o.config.empty() ? luq::RunConfig{} : luq::load_run_config(o.config);
  if (!o.methods.empty()) c.methods = parse_methods_csv(o.methods);
  if (o.n) c.n_samples = *o.n;
  if (o.temperature) c.temperature = *o.temperature;
  if (!o.scorer.empty()) c.scorer = o.scorer;
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.factuality.empty()) c.factuality = o.factuality;
  if (c.n_samples < 1) throw luq::Error(luq::ErrorCode::invalid_argument, "--n must be >= 1");
  if (!(c.temperature > 0.0)) throw luq::Error(luq::ErrorCode::invalid_argument, "--temperature must be > 0");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based uncertainty estimation for long-form generations"};
  app.require_subcommand(1);
  Overrides o;

  const auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run config (JSON)");
    sub->add_option("--methods", o.methods, "Comma-separated methods");
    sub->add_option("--n", o.n, "Samples per query")->check(CLI::PositiveNumber);
    sub->add_option("--temperature", o.temperature, "Sampling temperature");
    sub->add_option("--scorer", o.scorer, "NLI service URL or 'mock'");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--out", o.out, "Output directory");
  };
  const auto add_eval = [&o](CLI::App* sub) {
    sub->add_option("--factuality", o.factuality, "Factuality records (JSONL)");
  };

  auto* sample = app.add_subcommand("sample", "Generate main responses and samples");
  auto* estimate = app.add_subcommand("estimate", "Score every response set with every method");
  auto* eval = app.add_subcommand("eval", "Join scores with factuality and write the report");
  auto* ensemble = app.add_subcommand("ensemble", "Per-question model selection by lowest uncertainty");
  auto* select = app.add_subcommand("select", "Selective answering curves");
  for (auto* sub : {sample, estimate, eval, ensemble, select}) add_common(sub);
  for (auto* sub : {eval, ensemble, select}) add_eval(sub);
  eval->add_flag("--ensemble", o.ensemble, "Fail unless the ensemble section can be built");
  eval->add_flag("--selective", o.selective, "Fail unless the selective curves can be built");

  CLI11_PARSE(app, argc, argv);

  luq::RunConfig config;
  try {
    config = resolve(o);
  } catch (const luq::Error& e) {
    std::cerr << "luq: " << e.what() << "\n";
    return luq::kExitFatal;
  }

  int code = luq::kExitFatal;
  if (sample->parsed()) code = luq::cmd_sample(config);
  else if (estimate->parsed()) code = luq::cmd_estimate(config);
  else if (eval->parsed()) code = luq::cmd_eval(config, {o.ensemble, o.selective});
  else if (ensemble->parsed()) code = luq::cmd_ensemble(config);
  else if (select->parsed()) code = luq::cmd_select(config);

  if (code != luq::kExitOk)
    std::cerr << "luq: " << (code == luq::kExitPartial ? "partial" : "failed") << ", see manifest in " << config.out_dir
              << "\n";
  return code;
}
