// luq_synth: writes a synthetic biography dataset, its factuality labels and
// a run config that samples it through the offline mock provider.
//
//   <out>/queries.jsonl      one query per entity
//   <out>/factuality.jsonl   per model: fs of the main response, refusal flag
//   <out>/config.json        ready for `luq sample --config <out>/config.json`

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "luq/error.hpp"
#include "luq/pipeline.hpp"
#include "luq/synthetic.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic dataset generator"};
  std::string out = "data/synthetic";
  std::string run_dir = "runs/synthetic";
  int queries = 20;
  std::uint64_t world_seed = 7;
  std::uint64_t seed = 0;
  int n = 10;
  std::string models = "synth-alpha,synth-beta,synth-gamma";
  app.add_option("--out", out, "Directory for the generated files");
  app.add_option("--run-dir", run_dir, "out_dir written into the config");
  app.add_option("--queries", queries, "Number of queries")->check(CLI::Range(1, 1024));
  app.add_option("--world", world_seed, "World seed");
  app.add_option("--seed", seed, "Sampling seed written into the config");
  app.add_option("--n", n, "Samples per query")->check(CLI::PositiveNumber);
  app.add_option("--models", models, "Comma-separated model ids");
  CLI11_PARSE(app, argc, argv);

  try {
    const luq::synthetic::World world(world_seed);
    const luq::RefusalPolicy policy;
    fs::create_directories(out);
    const std::string endpoint = "mock://synthetic?world=" + std::to_string(world_seed);

    std::vector<std::string> model_ids;
    std::stringstream in(models);
    for (std::string m; std::getline(in, m, ',');)
      if (!luq::trim(m).empty()) model_ids.push_back(luq::trim(m));

    std::ofstream qf(fs::path(out) / "queries.jsonl");
    std::ofstream ff(fs::path(out) / "factuality.jsonl");
    std::vector<luq::Query> qs;
    for (int i = 0; i < queries; ++i) {
      luq::Query q;
      char id[16];
      std::snprintf(id, sizeof id, "q%04d", i + 1);
      q.id = id;
      q.entity = world.entity_name((i * 97) % 1024);
      q.prompt = luq::bio_prompt(q.entity);
      q.frequency_label = world.frequency_label(q.entity);
      qf << luq::Json(q).dump() << "\n";
      qs.push_back(q);
    }
    for (const auto& model : model_ids) {
      for (const auto& q : qs) {
        const auto text = world.generate(model, q.entity, 0, seed);
        luq::FactualityRecord f;
        f.query_id = q.id;
        f.model_id = model;
        f.frequency = q.frequency_label;
        f.responded = !luq::detect_refusal(text, policy);
        f.fs = f.responded ? world.fact_score(q.entity, text) : 0.0;
        if (f.responded) f.num_facts = world.fact_count(q.entity, text);
        ff << luq::Json(f).dump() << "\n";
      }
    }

    luq::RunConfig config;
    config.dataset = (fs::path(out) / "queries.jsonl").string();
    config.factuality = (fs::path(out) / "factuality.jsonl").string();
    config.out_dir = run_dir;
    config.seed = seed;
    config.n_samples = n;
    config.methods = {luq::Method::luq,     luq::Method::luq_pair, luq::Method::luq_atomic, luq::Method::selfcheck_nli,
                      luq::Method::lexsim,  luq::Method::numsets,  luq::Method::eigv,       luq::Method::deg,
                      luq::Method::ecc,     luq::Method::msp,      luq::Method::mcse,       luq::Method::se};
    for (const auto& model : model_ids) {
      luq::ProviderConfig p;
      p.endpoint_url = endpoint;
      p.model_id = model;
      p.request_logprobs = true;
      config.providers.push_back(p);
    }
    std::ofstream cf(fs::path(out) / "config.json");
    cf << luq::Json(config).dump(2) << "\n";
    if (!qf || !ff || !cf) throw luq::Error(luq::ErrorCode::io, "cannot write into " + out);
  } catch (const luq::Error& e) {
    std::cerr << "luq_synth: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
