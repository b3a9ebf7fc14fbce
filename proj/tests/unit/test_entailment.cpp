#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "luq/entailment.hpp"
#include "luq/error.hpp"
#include "support.hpp"

using namespace luq;

namespace {

std::vector<TextPair> distinct_pairs(int count) {
  std::vector<TextPair> out;
  for (int i = 0; i < count; ++i)
    out.push_back({"He was born in " + std::to_string(1900 + i) + ".", "He was born in 1950 in Paris."});
  return out;
}

class FailingScorer : public EntailmentScorer {
 public:
  explicit FailingScorer(int succeed_first) : left_(succeed_first) {}
  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override {
    if (left_-- <= 0) throw Error(ErrorCode::scorer_unavailable, "service down");
    return std::vector<EntailmentJudgment>(pairs.size(), MockScorer::kNeutral);
  }
  std::string id() const override { return "failing"; }

 private:
  int left_;
};

}  // namespace

TEST_CASE("two-class softmax examples") {
  CHECK(entail_probability({0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(entail_probability({2, 0, 0}) == doctest::Approx(0.8807970779778823).epsilon(1e-14));
  CHECK(entail_probability({0, 0, 2}) == doctest::Approx(0.11920292202211755).epsilon(1e-14));
  CHECK(contradict_probability({0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(contradict_probability({2, 0, 0}) == doctest::Approx(0.11920292202211755).epsilon(1e-14));
}

TEST_CASE("the neutral logit never changes the probabilities") {
  CHECK(entail_probability({1.0, 50.0, -1.0}) == entail_probability({1.0, -50.0, -1.0}));
}

TEST_CASE("extreme logits stay finite and ordered") {
  CHECK(entail_probability({800, 0, -800}) == 1.0);
  CHECK(entail_probability({-800, 0, 800}) == 0.0);
  CHECK(entail_probability({-800, 0, 800}) + contradict_probability({-800, 0, 800}) == 1.0);
}

TEST_CASE("non-finite logits are rejected") {
  const double inf = std::numeric_limits<double>::infinity();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (EntailmentJudgment j : {EntailmentJudgment{inf, 0, 0}, EntailmentJudgment{0, 0, nan}, EntailmentJudgment{0, nan, 0}}) {
    try {
      entail_probability(j);
      FAIL("expected non-finite-logit");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::non_finite_logit);
    }
  }
}

TEST_CASE("property: normalization and shift invariance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> logit(-30.0, 30.0);
  for (int i = 0; i < 10000; ++i) {
    const double le = logit(rng), lc = logit(rng), c = logit(rng);
    const EntailmentJudgment j{le, logit(rng), lc};
    CHECK(std::abs(entail_probability(j) + contradict_probability(j) - 1.0) <= 1e-12);
    CHECK(std::abs(entail_probability({le + c, 0, lc + c}) - entail_probability(j)) <= 1e-12);
  }
}

TEST_CASE("mock scorer rule classes") {
  CHECK(MockScorer::judge("He was born in 1950.", "He was born in 1950 in Paris.") == MockScorer::kEntail);
  CHECK(MockScorer::judge("He was born in 1951.", "He was born in 1950 in Paris.") == MockScorer::kContradict);
  CHECK(MockScorer::judge("He worked as a poet.", "He worked as a lawyer.") == MockScorer::kContradict);
  CHECK(MockScorer::judge("He lived in Oslo.", "He lived in Rome.") == MockScorer::kContradict);
  CHECK(MockScorer::judge("He married in May.", "He married in June.") == MockScorer::kContradict);
  CHECK(MockScorer::judge("He enjoyed chess.", "He was born in 1950.") == MockScorer::kNeutral);
  // Different heads never conflict.
  CHECK(MockScorer::judge("He died in 1990.", "He was born in 1950.") == MockScorer::kNeutral);
  // Case and stopwords are ignored.
  CHECK(MockScorer::judge("THE physicist", "a physicist") == MockScorer::kEntail);
}

TEST_CASE("mock scorer is deterministic and order preserving") {
  MockScorer mock;
  const std::vector<TextPair> pairs{{"A was born in 1950.", "A was born in 1950."},
                                    {"A was born in 1951.", "A was born in 1950."},
                                    {"A likes tea.", "A was born in 1950."}};
  const auto first = mock.score_batch(pairs);
  CHECK(first == mock.score_batch(pairs));
  CHECK(first == std::vector<EntailmentJudgment>{MockScorer::kEntail, MockScorer::kContradict, MockScorer::kNeutral});
  CHECK(contradict_probability(MockScorer::kEntail) == doctest::Approx(0.0024726231566347743).epsilon(1e-14));
}

TEST_CASE("score_cached sends only the misses") {
  MockScorer mock;
  test::CountingScorer counting(mock);
  JudgmentCache cache;
  const auto pairs = distinct_pairs(100);
  score_cached(counting, std::span(pairs).first(60), cache, 16);
  counting.batch_sizes.clear();
  counting.seen.clear();

  GatewayStats stats;
  const auto out = score_cached(counting, pairs, cache, 16, &stats);
  CHECK(out.size() == 100);
  CHECK(counting.seen.size() == 40);
  CHECK(counting.batch_sizes == std::vector<std::size_t>{16, 16, 8});
  CHECK(stats.scorer_calls == 3);
  CHECK(stats.cache_hits == 60);
  for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(out[i] == MockScorer::judge(pairs[i].hypothesis, pairs[i].premise));

  counting.batch_sizes.clear();
  score_cached(counting, pairs, cache, 16);
  CHECK(counting.batch_sizes.empty());
}

TEST_CASE("score_cached scores duplicate pairs once") {
  MockScorer mock;
  test::CountingScorer counting(mock);
  JudgmentCache cache;
  const std::vector<TextPair> pairs(5, TextPair{"x was born in 1950.", "x was born in 1950."});
  CHECK(score_cached(counting, pairs, cache).size() == 5);
  CHECK(counting.seen.size() == 1);
}

TEST_CASE("judgment cache persists across instances and is keyed by scorer id") {
  test::TempDir dir("judgments");
  MockScorer mock;
  const auto pairs = distinct_pairs(10);
  {
    JudgmentCache cache(dir / "j.jsonl");
    score_cached(mock, pairs, cache);
    CHECK(cache.size() == 10);
  }
  JudgmentCache reloaded(dir / "j.jsonl");
  CHECK(reloaded.size() == 10);
  test::CountingScorer counting(mock);
  score_cached(counting, pairs, reloaded);
  CHECK(counting.seen.empty());
  CHECK(JudgmentCache::key(pairs[0], "a") != JudgmentCache::key(pairs[0], "b"));
  CHECK(JudgmentCache::key({"ab", "c"}, "s") != JudgmentCache::key({"a", "bc"}, "s"));
}

TEST_CASE("score_cached surfaces the unscored pairs") {
  FailingScorer failing(1);
  JudgmentCache cache;
  const auto pairs = distinct_pairs(40);
  try {
    score_cached(failing, pairs, cache, 16);
    FAIL("expected scorer-unavailable");
  } catch (const UnscoredPairsError& e) {
    CHECK(e.code() == ErrorCode::scorer_unavailable);
    CHECK(e.unscored().size() == 24);
    CHECK(e.unscored().front() == 16);
  }
  CHECK(cache.size() == 16);
}

TEST_CASE("long premises are cut from the tail and counted") {
  MockScorer mock;
  test::CountingScorer counting(mock);
  counting.max_premise = 20;
  JudgmentCache cache;
  GatewayStats stats;
  const std::vector<TextPair> pairs{{"He was born in 1950.", "He was born in 1950. Much later he moved abroad."},
                                    {"short", "short premise"}};
  score_cached(counting, pairs, cache, 16, &stats);
  CHECK(stats.truncations == 1);
  CHECK(counting.seen[0].premise == "He was born in 1950.");
  CHECK(counting.seen[1].premise == "short premise");
}

TEST_CASE("truncation never splits a UTF-8 sequence") {
  MockScorer mock;
  test::CountingScorer counting(mock);
  counting.max_premise = 4;
  JudgmentCache cache;
  score_cached(counting, std::vector<TextPair>{{"h", "ab\xC3\xA9\xC3\xA9"}}, cache);
  CHECK(counting.seen[0].premise == "ab\xC3\xA9");
  counting.max_premise = 3;
  score_cached(counting, std::vector<TextPair>{{"h2", "ab\xC3\xA9\xC3\xA9"}}, cache);
  CHECK(counting.seen[1].premise == "ab");
}

TEST_CASE("cached scorer decorates any scorer") {
  MockScorer mock;
  JudgmentCache cache;
  CachedScorer cached(mock, cache, 4);
  const auto pairs = distinct_pairs(10);
  CHECK(cached.score_batch(pairs) == mock.score_batch(pairs));
  CHECK(cached.score_batch(pairs) == mock.score_batch(pairs));
  CHECK(cached.stats().scorer_calls == 3);
  CHECK(cached.stats().cache_hits == 10);
  CHECK(cached.id() == "mock-v1");
}

TEST_CASE("remote scorer wire format") {
  const std::vector<TextPair> pairs{{"A man is asleep.", "A man is sleeping."}};
  CHECK(RemoteScorer::build_request_body(pairs).dump() ==
        R"({"pairs":[{"premise":"A man is sleeping.","hypothesis":"A man is asleep."}]})");
  const auto parsed = RemoteScorer::parse_response(
      R"({"results":[{"entail":2.5,"neutral":0.1,"contradict":-1.0}],"model_id":"nli"})", 1);
  CHECK(parsed == std::vector<EntailmentJudgment>{{2.5, 0.1, -1.0}});
  for (const char* bad : {"{}", R"({"results":[]})", R"({"results":[{"entail":1}]})", "nope",
                          R"({"results":[{"entail":"x","neutral":0,"contradict":0}]})"}) {
    try {
      RemoteScorer::parse_response(bad, 1);
      FAIL("expected scorer-unavailable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::scorer_unavailable);
    }
  }
}
