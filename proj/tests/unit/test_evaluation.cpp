#include <numeric>
#include <random>

#include "doctest.h"
#include "luq/error.hpp"
#include "luq/evaluation.hpp"
#include "support.hpp"

using namespace luq;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

JoinedRecord record(const std::string& id, double fs, std::optional<double> u, bool responded = true,
                    const std::string& model = "m", Method method = Method::luq, bool bounded = true) {
  JoinedRecord r;
  r.query_id = id;
  r.model_id = model;
  r.fact.query_id = id;
  r.fact.fs = responded ? fs : 0.0;
  r.fact.responded = responded;
  if (u) r.scores[method] = UncertaintyScore{method, *u, bounded};
  return r;
}

std::string qid(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "q%04d", i);
  return buf;
}

}  // namespace

TEST_CASE("pearson and spearman examples") {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 4, 9, 16};
  CHECK(pearson(x, y) == doctest::Approx(0.9843740386976971).epsilon(1e-12));
  CHECK(spearman(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 3}) ==
        doctest::Approx(0.8660254037844387).epsilon(1e-12));
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("correlation input errors") {
  const std::vector<double> three{1, 2, 3};
  CHECK(code_of([&] { pearson(three, std::vector<double>{1, 2}); }) == ErrorCode::length_mismatch);
  CHECK(code_of([&] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }) == ErrorCode::insufficient_data);
  CHECK(code_of([&] { pearson(three, std::vector<double>{5, 5, 5}); }) == ErrorCode::constant_input);
  CHECK(code_of([&] { spearman(std::vector<double>{2, 2, 2}, three); }) == ErrorCode::constant_input);
}

TEST_CASE("property: correlations match the definitional formulas") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + rng() % 60;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Rounded values force ties.
      x[i] = trial % 2 ? std::round(g(rng) * 2) : g(rng);
      y[i] = 0.3 * x[i] + g(rng);
    }
    // Spearman ignores strictly monotone transforms.
    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i) warped[i] = std::exp(x[i]) + x[i] * x[i] * x[i];
    try {
      CHECK(std::abs(pearson(x, y) - test::brute_pearson(x, y)) <= 1e-9);
      CHECK(std::abs(spearman(x, y) - test::brute_spearman(x, y)) <= 1e-9);
      CHECK(std::abs(spearman(warped, y) - spearman(x, y)) <= 1e-12);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::constant_input);
    }
  }
}

TEST_CASE("correlation classes use half-open intervals") {
  CHECK(classify_correlation(-0.851) == CorrelationClass::strong);
  CHECK(classify_correlation(0.05) == CorrelationClass::negligible);
  CHECK(classify_correlation(0.7) == CorrelationClass::moderate);
  CHECK(classify_correlation(0.95) == CorrelationClass::very_strong);
  CHECK(classify_correlation(-0.3) == CorrelationClass::very_weak);
  CHECK(classify_correlation(0.31) == CorrelationClass::weak);
  CHECK(classify_correlation(1.0) == CorrelationClass::very_strong);
  CHECK(to_string(CorrelationClass::very_weak) == "very_weak");
  CHECK(code_of([] { classify_correlation(1.2); }) == ErrorCode::out_of_range);
}

TEST_CASE("penalized aggregates count refusals as zero factuality and full uncertainty") {
  const std::vector<JoinedRecord> recs{record("a", 0.8, 0.2), record("b", 0.0, std::nullopt, false)};
  const auto a = penalized_aggregates(recs, Method::luq);
  CHECK(a.fs == doctest::Approx(0.8));
  CHECK(a.pfs == doctest::Approx(0.4));
  CHECK(a.us == doctest::Approx(0.2));
  REQUIRE(a.pus);
  CHECK(*a.pus == doctest::Approx(0.6));
  CHECK(percent1(a.rr) == 50.0);
  CHECK(percent1(433.0 / 500.0) == 86.6);
  CHECK(a.questions == 2);
  CHECK(a.responded == 1);
}

TEST_CASE("penalized aggregates of unbounded methods") {
  const std::vector<JoinedRecord> recs{record("a", 0.8, 3.0, true, "m", Method::numsets, false),
                                       record("b", 0.4, 5.0, true, "m", Method::numsets, false),
                                       record("c", 0.0, std::nullopt, false)};
  CHECK(code_of([&] { penalized_aggregates(recs, Method::numsets); }) == ErrorCode::unbounded_method_for_pus);
  AggregateOptions lax;
  lax.require_pus = false;
  const auto a = penalized_aggregates(recs, Method::numsets, lax);
  CHECK_FALSE(a.pus);
  CHECK(a.us == doctest::Approx(4.0));
  AggregateOptions norm;
  norm.normalize_unbounded = true;
  const auto n = penalized_aggregates(recs, Method::numsets, norm);
  REQUIRE(n.pus);
  CHECK(*n.pus == doctest::Approx((0.0 + 1.0 + 1.0) / 3.0));
}

TEST_CASE("property: the penalization identity holds") {
  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<JoinedRecord> recs;
    const int q = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < q; ++i) {
      const bool responded = i == 0 || d(rng) > 0.3;
      recs.push_back(record(qid(i), d(rng), responded ? std::optional(d(rng)) : std::nullopt, responded));
    }
    const auto a = penalized_aggregates(recs, Method::luq);
    CHECK(std::abs(a.pfs - a.rr * a.fs) <= 1e-12);
    CHECK(std::abs(*a.pus - (a.rr * a.us + (1.0 - a.rr))) <= 1e-12);
  }
}

TEST_CASE("correlation report rows") {
  std::vector<JoinedRecord> recs;
  for (int i = 0; i < 10; ++i) {
    auto r = record(qid(i), i / 10.0, 1.0 - i / 10.0);
    r.scores[Method::numsets] = {Method::numsets, 2.0, false};
    recs.push_back(r);
  }
  recs.push_back(record("refused", 0.0, std::nullopt, false));
  const auto rows = correlation_report(recs, {Method::luq, Method::numsets, Method::ecc});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].n == 10);
  CHECK(percent1(*rows[0].pcc) == -100.0);
  CHECK(*rows[0].scc == doctest::Approx(-1.0));
  CHECK(*rows[0].category == CorrelationClass::very_strong);
  CHECK_FALSE(rows[1].pcc);
  CHECK(rows[1].note == "constant-input");
  CHECK(rows[2].n == 0);
  CHECK(rows[2].note == "insufficient-data");
}

TEST_CASE("independent scores correlate negligibly") {
  std::mt19937_64 rng(79);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<JoinedRecord> recs;
  for (int i = 0; i < 2000; ++i) recs.push_back(record(qid(i), d(rng), d(rng)));
  const auto row = correlation_report(recs, {Method::luq}).front();
  CHECK(std::abs(*row.scc) < 0.1);
  CHECK(*row.category == CorrelationClass::negligible);
}

TEST_CASE("ensemble picks the least uncertain model per question") {
  std::map<std::string, std::vector<JoinedRecord>> per_model;
  per_model["a"] = {record("q1", 0.9, 0.1, true, "a"), record("q2", 0.2, 0.7, true, "a"),
                    record("q3", 0.0, std::nullopt, false, "a")};
  per_model["b"] = {record("q1", 0.5, 0.4, true, "b"), record("q2", 0.8, 0.3, true, "b"),
                    record("q3", 0.6, 0.5, true, "b")};
  const auto e = ensemble_select(per_model, Method::luq);
  REQUIRE(e.choices.size() == 3);
  CHECK(e.choices[0].model_id == "a");
  CHECK(e.choices[1].model_id == "b");
  CHECK(e.choices[2].model_id == "b");
  CHECK(e.answer_distribution.at("a") + e.answer_distribution.at("b") == doctest::Approx(100.0));
  CHECK(e.aggregates.pfs == doctest::Approx((0.9 + 0.8 + 0.6) / 3));
  CHECK(e.aggregates.rr == 1.0);
}

TEST_CASE("ensemble ties prefer an answer, then the priority order") {
  std::map<std::string, std::vector<JoinedRecord>> per_model;
  per_model["a"] = {record("q1", 0.2, 0.5, true, "a"), record("q2", 0.0, std::nullopt, false, "a")};
  per_model["b"] = {record("q1", 0.9, 0.5, true, "b"), record("q2", 0.4, 1.0, true, "b")};
  auto e = ensemble_select(per_model, Method::luq);
  CHECK(e.choices[0].model_id == "a");
  CHECK(e.choices[1].model_id == "b");
  e = ensemble_select(per_model, Method::luq, {"b", "a"});
  CHECK(e.choices[0].model_id == "b");
}

TEST_CASE("ensemble coverage gaps") {
  std::map<std::string, std::vector<JoinedRecord>> per_model;
  per_model["a"] = {record("q1", 0.2, 0.5, true, "a"), record("q2", 0.2, 0.5, true, "a")};
  per_model["b"] = {record("q1", 0.9, 0.5, true, "b")};
  CHECK(code_of([&] { ensemble_select(per_model, Method::luq); }) == ErrorCode::coverage_gap);
  per_model["b"].push_back(record("q2", 0.9, std::nullopt, true, "b"));
  CHECK(code_of([&] { ensemble_select(per_model, Method::luq); }) == ErrorCode::coverage_gap);
}

TEST_CASE("property: ensemble uncertainty never exceeds the best single model") {
  std::mt19937_64 rng(83);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, std::vector<JoinedRecord>> per_model;
    for (const char* m : {"x", "y", "z"})
      for (int i = 0; i < 30; ++i) {
        const bool responded = d(rng) > 0.2;
        per_model[m].push_back(record(qid(i), d(rng), responded ? std::optional(d(rng)) : std::nullopt, responded, m));
      }
    const auto e = ensemble_select(per_model, Method::luq);
    for (const auto& [m, recs] : per_model) CHECK(*e.aggregates.pus <= *penalized_aggregates(recs, Method::luq).pus + 1e-12);
  }
}

TEST_CASE("selective answering drops the most uncertain questions first") {
  const std::vector<JoinedRecord> recs{record("q1", 0.9, 0.1), record("q2", 0.8, 0.2), record("q3", 0.2, 0.8),
                                       record("q4", 0.1, 0.9)};
  const auto curve = selective_curve(recs, Method::luq, {0.0, 25.0});
  CHECK(curve.points[0].fs == doctest::Approx(0.5));
  CHECK(curve.points[0].abstained == 0);
  CHECK(curve.points[1].abstained == 1);
  CHECK(curve.points[1].fs == doctest::Approx(1.9 / 3.0).epsilon(1e-12));
  CHECK(curve.points[1].us == doctest::Approx(1.1 / 3.0).epsilon(1e-12));
}

TEST_CASE("selective curve on the default grid") {
  std::vector<JoinedRecord> recs;
  for (int i = 0; i < 100; ++i) recs.push_back(record(qid(i), i / 100.0, 1.0 - i / 100.0));
  recs.push_back(record("refused", 0.0, std::nullopt, false));
  const auto curve = selective_curve(recs, Method::luq);
  REQUIRE(curve.points.size() == 7);
  CHECK(curve.points[1].abstained == 3);  // ceil(2.5)
  for (std::size_t k = 1; k < curve.points.size(); ++k) CHECK(curve.points[k].fs >= curve.points[k - 1].fs);
}

TEST_CASE("selective ties abstain the smaller query id first") {
  const std::vector<JoinedRecord> recs{record("b", 0.9, 0.5), record("a", 0.1, 0.5), record("c", 0.5, 0.2)};
  const auto curve = selective_curve(recs, Method::luq, {30.0});
  CHECK(curve.points[0].fs == doctest::Approx(0.7));
}

TEST_CASE("selective grid and retained-set errors") {
  const std::vector<JoinedRecord> recs{record("a", 0.9, 0.5)};
  CHECK(code_of([&] { selective_curve(recs, Method::luq, {50.0}); }) == ErrorCode::empty_retained_set);
  CHECK(code_of([&] { selective_curve(recs, Method::luq, {100.0}); }) == ErrorCode::out_of_range);
  CHECK(code_of([&] { selective_curve(recs, Method::luq, {5.0, 5.0}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("frequency buckets") {
  std::vector<JoinedRecord> recs{record("a", 0.2, 0.8), record("b", 0.4, 0.6), record("c", 0.9, 0.1),
                                 record("d", 0.5, 0.5), record("e", 0.0, std::nullopt, false)};
  recs[0].frequency = recs[1].frequency = FrequencyLabel::rare;
  recs[2].frequency = FrequencyLabel::very_frequent;
  recs[4].frequency = FrequencyLabel::rare;
  const auto buckets = frequency_report(recs, Method::luq);
  REQUIRE(buckets.size() == 2);
  CHECK(buckets[0].label == FrequencyLabel::rare);
  CHECK(buckets[0].count == 2);
  CHECK(buckets[0].fs == doctest::Approx(0.3));
  CHECK(*buckets[0].us == doctest::Approx(0.7));
  CHECK(buckets[1].label == FrequencyLabel::very_frequent);
  std::vector<JoinedRecord> unknown{record("a", 0.2, 0.8)};
  CHECK(code_of([&] { frequency_report(unknown, Method::luq); }) == ErrorCode::all_unknown);
}
