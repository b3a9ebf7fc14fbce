#include "luq/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "luq/hashing.hpp"
#include "luq/text.hpp"

namespace luq::synthetic {

namespace {

constexpr std::array<std::string_view, 32> kFirst{
    "Alma",   "Bertil", "Corinna", "Dorian", "Edda",    "Felix",  "Greta",  "Hollis", "Ingrid", "Jasper", "Kaia",
    "Lorcan", "Maren",  "Niall",   "Odile",  "Piet",    "Quilla", "Rafe",   "Saskia", "Tobias", "Ulla",   "Viggo",
    "Wilma",  "Xander", "Yvette",  "Zeno",   "Anouk",   "Bram",   "Cosima", "Dario",  "Elke",   "Fintan"};
constexpr std::array<std::string_view, 32> kLast{
    "Abernethy", "Brightwater", "Castellane", "Dunmore", "Eckhardt", "Fairbrook", "Grimsby",  "Halloran",
    "Ivarsson",  "Jorgensen",   "Kilbride",   "Lindqvist", "Marchetti", "Northcote", "Ostrander", "Pellegrin",
    "Quarrington", "Rosenthal", "Stavros",    "Thorsby",  "Underhill", "Valdemar",  "Whitcombe", "Yardley",
    "Zellweger", "Ashgrove",    "Blackmere",  "Carrow",   "Delacourt", "Ellingham", "Fenwick",   "Garroway"};
constexpr std::array<std::string_view, 20> kCities{
    "London", "Paris",     "Berlin", "Vienna", "Rome",  "Madrid",  "Lisbon",  "Prague", "Warsaw", "Oslo",
    "Stockholm", "Dublin", "Athens", "Cairo",  "Boston", "Chicago", "Toronto", "Sydney", "Tokyo",  "Mumbai"};
constexpr std::array<std::string_view, 20> kProfessions{
    "physicist", "chemist",   "painter",   "composer",    "novelist",   "poet",      "architect",
    "surgeon",   "engineer",  "mathematician", "historian", "economist", "sculptor", "philosopher",
    "astronomer", "biologist", "lawyer",   "diplomat",    "journalist", "photographer"};

enum class Kind { year, city, profession };
constexpr std::array<Kind, kSlots> kSlotKinds{Kind::year, Kind::city, Kind::profession, Kind::city, Kind::year, Kind::year};

std::string slot_prefix(std::string_view entity, int slot) {
  std::string e(entity);
  switch (slot) {
    case 0: return e + " was born in ";
    case 1: return e + " grew up in ";
    case 2: return e + " worked as a ";
    case 3: return e + " later lived in ";
    case 4: return e + " received a national prize in ";
    default: return e + " died in ";
  }
}

double hash_unit(std::uint64_t seed, std::string_view a, std::string_view b = {}, std::string_view c = {}) {
  std::string key;
  key.append(a).push_back('\x1f');
  key.append(b).push_back('\x1f');
  key.append(c);
  return Rng(fnv1a64(key, seed ^ 0x9E3779B97F4A7C15ULL)).unit();
}

std::string wrong_value(Kind kind, const std::string& truth, Rng& rng) {
  if (kind == Kind::year) {
    const int offset = 1 + static_cast<int>(rng.below(15));
    const int sign = rng.unit() < 0.5 ? -1 : 1;
    return std::to_string(std::stoi(truth) + sign * offset);
  }
  const auto pick = [&](const auto& list) {
    std::string v;
    do {
      v = std::string(list[rng.below(list.size())]);
    } while (v == truth);
    return v;
  };
  return kind == Kind::city ? pick(kCities) : pick(kProfessions);
}

}  // namespace

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

World::World(std::uint64_t seed, double refusal_threshold) : seed_(seed), refusal_threshold_(refusal_threshold) {}

std::string World::entity_name(int i) const {
  const auto k = static_cast<std::size_t>(i);
  std::string name = std::string(kFirst[k % kFirst.size()]) + " " + std::string(kLast[(k / kFirst.size()) % kLast.size()]);
  if (k >= kFirst.size() * kLast.size()) name += " " + std::string(kLast[(k / 1024) % kLast.size()]);
  return name;
}

double World::popularity(std::string_view entity) const { return hash_unit(seed_, "popularity", entity); }

FrequencyLabel World::frequency_label(std::string_view entity) const {
  const double p = popularity(entity);
  if (p < 0.2) return FrequencyLabel::very_rare;
  if (p < 0.4) return FrequencyLabel::rare;
  if (p < 0.6) return FrequencyLabel::medium;
  if (p < 0.8) return FrequencyLabel::frequent;
  return FrequencyLabel::very_frequent;
}

double World::knowledge(std::string_view model_id, std::string_view entity) const {
  const double skill = 0.6 + 0.4 * hash_unit(seed_, "skill", model_id);
  const double noise = hash_unit(seed_, "noise", model_id, entity) - 0.5;
  return std::clamp(0.1 + 0.85 * popularity(entity) * skill + 0.2 * noise, 0.0, 1.0);
}

std::string World::true_value(std::string_view entity, int slot) const {
  Rng rng(fnv1a64(std::string(entity) + "#truth", seed_));
  const int birth = 1900 + static_cast<int>(rng.below(80));
  const int prize = birth + 30 + static_cast<int>(rng.below(30));
  const int death = birth + 60 + static_cast<int>(rng.below(35));
  const std::string raised(kCities[rng.below(kCities.size())]);
  const std::string profession(kProfessions[rng.below(kProfessions.size())]);
  const std::string lived(kCities[rng.below(kCities.size())]);
  switch (slot) {
    case 0: return std::to_string(birth);
    case 1: return raised;
    case 2: return profession;
    case 3: return lived;
    case 4: return std::to_string(prize);
    default: return std::to_string(death);
  }
}

std::string World::sentence(std::string_view entity, int slot, std::string_view value) const {
  return slot_prefix(entity, slot) + std::string(value) + ".";
}

std::string World::generate(std::string_view model_id, std::string_view entity, int sample_index, std::uint64_t seed,
                            std::optional<double> knowledge) const {
  const double f = knowledge.value_or(this->knowledge(model_id, entity));
  if (refuses(f)) return "I'm sorry, but I do not have reliable information about " + std::string(entity) + ".";
  std::string key = std::string(model_id) + '\x1f' + std::string(entity) + '\x1f' + std::to_string(sample_index);
  Rng rng(fnv1a64(key, seed_ * 0x100000001b3ULL + seed));
  std::string text;
  for (int slot = 0; slot < kSlots; ++slot) {
    const std::string truth = true_value(entity, slot);
    const std::string value = rng.unit() < f ? truth : wrong_value(kSlotKinds[slot], truth, rng);
    if (!text.empty()) text.push_back(' ');
    text += sentence(entity, slot, value);
  }
  return text;
}

std::vector<double> World::token_logprobs(std::string_view entity, std::string_view text) const {
  std::vector<double> out;
  for (const auto& s : split_sentences(text)) {
    bool correct = false;
    for (int slot = 0; slot < kSlots; ++slot)
      if (s.text == sentence(entity, slot, true_value(entity, slot))) correct = true;
    const double per_token = correct ? -0.05 : -0.6;
    for (int w = word_count(s.text); w > 0; --w) out.push_back(per_token);
  }
  return out;
}

int World::fact_count(std::string_view entity, std::string_view text) const {
  int present = 0;
  for (int slot = 0; slot < kSlots; ++slot)
    if (text.find(slot_prefix(entity, slot)) != std::string_view::npos) ++present;
  return present;
}

double World::fact_score(std::string_view entity, std::string_view text) const {
  const int present = fact_count(entity, text);
  if (present == 0) return 0.0;
  int correct = 0;
  for (int slot = 0; slot < kSlots; ++slot)
    if (text.find(sentence(entity, slot, true_value(entity, slot))) != std::string_view::npos) ++correct;
  return static_cast<double>(correct) / present;
}

std::string entity_from_prompt(std::string_view prompt) {
  constexpr std::string_view kLead = "Tell me a short bio of the person ";
  constexpr std::string_view kTail = ". Begin with";
  if (prompt.substr(0, kLead.size()) == kLead) {
    auto rest = prompt.substr(kLead.size());
    auto end = rest.find(kTail);
    return trim(rest.substr(0, end));
  }
  return trim(prompt);
}

SyntheticProvider::SyntheticProvider(World world, KnowledgeFn knowledge)
    : world_(std::move(world)), knowledge_(std::move(knowledge)) {}

ChatCompletion SyntheticProvider::complete(const ChatRequest& request) {
  constexpr std::string_view kClaimLead = "Please breakdown";
  constexpr std::string_view kSentenceMarker = "Sentence: ";
  ChatCompletion out;
  if (request.prompt.rfind(kClaimLead, 0) == 0) {
    auto at = request.prompt.find(kSentenceMarker);
    std::string sentence = at == std::string::npos ? request.prompt : request.prompt.substr(at + kSentenceMarker.size());
    RuleClaimSplitter rules;
    for (const auto& c : rules.split(sentence)) out.text += "- " + c.text + "\n";
    return out;
  }
  const std::string entity = entity_from_prompt(request.prompt);
  std::optional<double> f;
  if (knowledge_) f = knowledge_(request.model_id, entity);
  out.text = world_.generate(request.model_id, entity, request.sample_index, request.seed.value_or(0), f);
  if (request.want_logprobs) out.token_logprobs = world_.token_logprobs(entity, out.text);
  return out;
}

}  // namespace luq::synthetic
