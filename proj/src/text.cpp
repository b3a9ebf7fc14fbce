#include "luq/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "luq/error.hpp"

namespace luq {

namespace {

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> set{
      "mr",   "mrs",  "ms",   "dr",   "prof", "sr",   "jr",   "st",  "mt",   "vs",  "etc", "inc", "ltd",
      "co",   "corp", "no",   "gen",  "col",  "lt",   "sgt",  "capt", "rev", "hon",  "gov", "sen", "rep",
      "pres", "jan",  "feb",  "apr",  "aug",  "sep",  "sept", "oct", "nov",  "dec", "approx", "fig", "al",
      "ca",   "cf",   "ed",   "vol",  "dept", "univ", "assn", "bros", "ft",  "est",
  };
  return set;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Token that ends at `dot` (exclusive), walking back to whitespace.
std::string_view token_before(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(text[start - 1])) --start;
  return text.substr(start, dot - start);
}

bool suppresses_break(std::string_view token) {
  // Strip leading punctuation such as an opening parenthesis or quote.
  while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
  if (token.empty()) return false;
  if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0]))) return true;  // initial
  if (token.find('.') != std::string_view::npos) return true;                                // M.I.T, e.g
  std::string lower;
  for (char c : token) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return abbreviations().contains(lower);
}

void emit(std::string_view text, std::size_t begin, std::size_t end, std::vector<Sentence>& out) {
  std::string s = trim(text.substr(begin, end - begin));
  if (!s.empty()) out.push_back({std::move(s), static_cast<int>(out.size())});
}

// --- rule-based claims -----------------------------------------------------

const std::unordered_set<std::string>& clause_verbs() {
  static const std::unordered_set<std::string> set{
      "is",        "was",      "were",      "are",       "be",        "been",      "has",        "had",
      "have",      "became",   "becomes",   "served",    "ruled",     "reigned",   "worked",     "works",
      "lived",     "died",     "studied",   "received",  "won",       "wrote",     "founded",    "joined",
      "married",   "moved",    "led",       "graduated", "published", "played",    "taught",     "created",
      "developed", "directed", "established", "held",    "earned",    "attended",  "remained",   "returned",
      "began",     "continued", "made",     "built",     "designed",  "produced",  "composed",   "painted",
      "discovered", "invented", "starred",  "appeared",  "released",  "recorded",  "coached",    "managed",
      "owned",     "ran",      "retired",   "resigned",  "succeeded", "represented", "competed", "scored",
      "introduced", "launched", "announced", "elected",  "appointed", "named",     "awarded",    "born",
      "known",     "raised",   "lives",     "serves",    "holds",     "remains",   "contributed", "taught",
  };
  return set;
}

struct Word {
  std::size_t begin;
  std::size_t end;
  std::string lower;  // alphabetic core, lowercased
};

std::vector<Word> words_of(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (b == i) break;
    std::string core;
    for (std::size_t k = b; k < i; ++k) {
      unsigned char c = static_cast<unsigned char>(s[k]);
      if (std::isalnum(c)) core.push_back(static_cast<char>(std::tolower(c)));
    }
    out.push_back({b, i, std::move(core)});
  }
  return out;
}

bool has_verb(std::string_view s) {
  for (const auto& w : words_of(s))
    if (clause_verbs().contains(w.lower)) return true;
  return false;
}

std::string strip_edges(std::string_view s) {
  std::string t = trim(s);
  while (!t.empty() && (t.back() == ',' || t.back() == ';' || t.back() == ':' || is_terminator(t.back()))) t.pop_back();
  return trim(t);
}

struct Delimiter {
  std::size_t begin;
  std::size_t end;
};

std::vector<Delimiter> find_delimiters(std::string_view s) {
  static constexpr std::string_view kDelims[] = {", and ", ", but ", "; ", " and "};
  std::vector<Delimiter> out;
  std::size_t i = 0;
  while (i < s.size()) {
    bool hit = false;
    for (auto d : kDelims) {
      if (s.substr(i, d.size()) == d) {
        out.push_back({i, i + d.size()});
        i += d.size();
        hit = true;
        break;
      }
    }
    if (!hit) ++i;
  }
  return out;
}

std::vector<std::string> split_clauses(std::string_view sentence) {
  std::string terminal;
  {
    std::string t = trim(sentence);
    if (!t.empty() && is_terminator(t.back())) terminal = std::string(1, t.back());
  }
  auto delims = find_delimiters(sentence);
  std::vector<std::string> bodies;
  std::size_t start = 0;
  for (std::size_t k = 0; k < delims.size(); ++k) {
    std::size_t right_end = k + 1 < delims.size() ? delims[k + 1].begin : sentence.size();
    auto left = sentence.substr(start, delims[k].begin - start);
    auto right = sentence.substr(delims[k].end, right_end - delims[k].end);
    if (has_verb(left) && has_verb(right)) {
      bodies.push_back(strip_edges(left));
      start = delims[k].end;
    }
  }
  bodies.push_back(strip_edges(sentence.substr(start)));
  std::erase_if(bodies, [](const std::string& b) { return b.empty(); });
  if (bodies.size() <= 1) {
    std::string whole = trim(sentence);
    return whole.empty() ? std::vector<std::string>{} : std::vector<std::string>{whole};
  }

  // Subject: words of the first clause before its first verb.
  std::string subject;
  {
    const auto& first = bodies.front();
    for (const auto& w : words_of(first)) {
      if (clause_verbs().contains(w.lower)) {
        subject = trim(std::string_view(first).substr(0, w.begin));
        break;
      }
    }
  }
  std::vector<std::string> claims;
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    std::string body = bodies[k];
    if (k > 0 && !subject.empty()) {
      auto ws = words_of(body);
      if (!ws.empty() && clause_verbs().contains(ws.front().lower)) body = subject + " " + body;
    }
    claims.push_back(body + terminal);
  }
  return claims;
}

}  // namespace

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      // Blank line forces a break.
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
      if (j < text.size() && text[j] == '\n') {
        emit(text, begin, i, out);
        begin = j;
        i = j;
        continue;
      }
      ++i;
      continue;
    }
    if (!is_terminator(c)) {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    while (end < text.size() && (is_terminator(text[end]) || is_closer(text[end]))) ++end;
    if (end < text.size() && !is_space(text[end])) {
      i = end;
      continue;
    }
    std::size_t next = end;
    while (next < text.size() && is_space(text[next])) ++next;
    bool split = true;
    if (next < text.size() && std::islower(static_cast<unsigned char>(text[next]))) split = false;
    if (split && c == '.' && next < text.size() && suppresses_break(token_before(text, i))) split = false;
    if (split) {
      emit(text, begin, end, out);
      begin = end;
    }
    i = end;
  }
  emit(text, begin, text.size(), out);
  return out;
}

std::vector<AtomicClaim> RuleClaimSplitter::split(std::string_view text) {
  std::vector<AtomicClaim> out;
  for (const auto& s : split_sentences(text))
    for (auto& c : split_clauses(s.text)) out.push_back({std::move(c), static_cast<int>(out.size())});
  return out;
}

// --- LLM splitter -----------------------------------------------------------

std::string LlmClaimSplitter::build_prompt(std::string_view sentence) {
  return "Please breakdown the following sentence into independent facts. Write one fact per line, each line "
         "starting with \"- \". Each fact must be a complete, self-contained sentence.\n\nSentence: " +
         std::string(sentence);
}

std::vector<std::string> LlmClaimSplitter::parse_reply(std::string_view reply) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    auto nl = reply.find('\n', pos);
    if (nl == std::string_view::npos) nl = reply.size();
    std::string line = trim(reply.substr(pos, nl - pos));
    pos = nl + 1;
    std::size_t k = 0;
    if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
      k = 1;
    } else if (line.rfind("•", 0) == 0) {
      k = std::string_view("•").size();
    } else {
      while (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) ++k;
      if (k > 0 && k < line.size() && (line[k] == '.' || line[k] == ')')) ++k;
      else k = 0;
    }
    std::string claim = trim(std::string_view(line).substr(k));
    if (!claim.empty()) out.push_back(std::move(claim));
  }
  return out;
}

LlmClaimSplitter::LlmClaimSplitter(ChatProvider& provider, std::string model_id, GenerationCache* cache,
                                   std::shared_ptr<ClaimSplitter> fallback)
    : provider_(provider), model_id_(std::move(model_id)), cache_(cache), fallback_(std::move(fallback)) {}

std::vector<std::string> LlmClaimSplitter::split_sentence(const std::string& sentence) {
  constexpr double kTemperature = 0.0;
  constexpr int kMaxTokens = 512;
  const std::string prompt = build_prompt(sentence);
  const std::string key = generation_cache_key(model_id_, prompt, kTemperature, kMaxTokens, 0);
  std::string reply;
  if (auto hit = cache_ ? cache_->find(key) : std::nullopt) {
    reply = hit->text;
  } else {
    reply = provider_.complete({model_id_, prompt, kTemperature, kMaxTokens, 0, false, std::nullopt}).text;
    if (cache_) cache_->put({key, std::string(kPromptVersion), model_id_, 0, reply, std::nullopt, {}});
  }
  auto claims = parse_reply(reply);
  if (claims.empty()) claims.push_back(sentence);
  return claims;
}

std::vector<AtomicClaim> LlmClaimSplitter::split(std::string_view text) {
  try {
    std::vector<AtomicClaim> out;
    for (const auto& s : split_sentences(text))
      for (auto& c : split_sentence(s.text)) out.push_back({std::move(c), static_cast<int>(out.size())});
    return out;
  } catch (const Error& e) {
    if (fallback_) return fallback_->split(text);
    throw Error(ErrorCode::splitter_unavailable, e.what());
  }
}

std::vector<AtomicClaim> split_atomic(std::string_view text, ClaimSplitter& splitter) {
  if (trim(text).empty()) return {};
  return splitter.split(text);
}

}  // namespace luq
