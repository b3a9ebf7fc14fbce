#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "luq/baselines.hpp"
#include "luq/error.hpp"
#include "support.hpp"

using namespace luq;

namespace {

const std::vector<std::vector<double>> kOracleS{
    {1, .8, .1, .2}, {.8, 1, .3, .1}, {.1, .3, 1, .7}, {.2, .1, .7, 1}};

SimilarityMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  SimilarityMatrix s(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) s(i, j) = rows[i][j];
  return s;
}

ResponseSet with_logprobs(std::vector<std::string> texts, const std::vector<std::vector<double>>& lps) {
  auto rs = test::response_set(std::move(texts));
  for (std::size_t i = 0; i < rs.size(); ++i) {
    Response& r = i == 0 ? rs.main : rs.samples[i - 1];
    r.token_logprobs = lps[i];
  }
  return rs;
}

std::vector<int> random_labels(std::mt19937_64& rng, std::size_t m) {
  std::vector<int> labels(m);
  const int blocks = 1 + static_cast<int>(rng() % m);
  for (auto& l : labels) l = static_cast<int>(rng() % blocks);
  return labels;
}

int distinct(const std::vector<int>& labels) {
  auto copy = labels;
  std::sort(copy.begin(), copy.end());
  return static_cast<int>(std::unique(copy.begin(), copy.end()) - copy.begin());
}

std::vector<std::vector<double>> directional_from(const std::vector<int>& labels, double inside, double outside) {
  std::vector<std::vector<double>> p(labels.size(), std::vector<double>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j) p[i][j] = labels[i] == labels[j] ? inside : outside;
  return p;
}

}  // namespace

TEST_CASE("entailment similarity matrix of identical and contradicting responses") {
  MockScorer mock;
  const auto same = similarity_matrix(test::response_set({"He was born in 1950.", "He was born in 1950.", "He was born in 1950."}),
                                      SimilarityKind::entail_sym, &mock);
  CHECK(same == SimilarityMatrix::ones(3));

  const auto clash = similarity_matrix(test::response_set({"He was born in 1950.", "He was born in 1960."}),
                                       SimilarityKind::entail_sym, &mock);
  CHECK(clash(0, 0) == 1.0);
  CHECK(clash(0, 1) == doctest::Approx(0.0024726231566347743).epsilon(1e-12));
  CHECK(clash(1, 0) == clash(0, 1));
  CHECK(validate_similarity_matrix(clash).empty());
}

TEST_CASE("similarity matrices skip refused samples") {
  MockScorer mock;
  auto rs = test::response_set({"He was born in 1950.", "I cannot answer.", "He was born in 1950."});
  rs.samples[0].is_refusal = true;
  CHECK(similarity_matrix(rs, SimilarityKind::entail_sym, &mock).size() == 2);
  rs.main.is_refusal = true;
  CHECK_THROWS_AS(similarity_matrix(rs, SimilarityKind::entail_sym, &mock), Error);
}

TEST_CASE("lexsim examples") {
  const auto constant = [](std::string_view, std::string_view) { return 0.25; };
  CHECK(lexsim_uncertainty(test::response_set({"a", "b", "c"}), constant).value == doctest::Approx(0.75));
  CHECK(lcs_f1("the cat sat", "the cat sat") == 1.0);
  CHECK(lcs_f1("the cat sat", "a dog ran") == 0.0);
  // LCS "the sat" of 3 and 4 words.
  CHECK(lcs_f1("The cat sat", "the dog quietly sat") == doctest::Approx(4.0 / 7.0));
  const auto u = lexsim_uncertainty(test::response_set({"x y", "x y"}));
  CHECK(u.value == 0.0);
  CHECK(u.method == Method::lexsim);
  CHECK(u.bounded01);
}

TEST_CASE("numsets counts bidirectional entailment clusters") {
  MockScorer mock;
  CHECK(numsets(test::response_set({"He was born in 1950.", "He was born in 1950.", "He was born in 1950."}), mock).value ==
        1.0);
  CHECK(numsets(test::response_set({"He was born in 1950.", "He was born in 1960.", "He was born in 1970."}), mock).value ==
        3.0);
  const auto part = semantic_partition(
      test::response_set({"He was born in 1950.", "He was born in 1960.", "He was born in 1950."}), mock);
  CHECK(part.count == 2);
  CHECK(part.cluster == std::vector<int>{0, 1, 0});
  // One-way entailment is not enough.
  CHECK(partition_from_entailment({{1, 0.9}, {0.2, 1}}, 0.5).count == 2);
  // Threshold is strict.
  CHECK(partition_from_entailment({{1, 0.5}, {0.5, 1}}, 0.5).count == 2);
  // Transitive merging.
  CHECK(partition_from_entailment({{1, .9, 0}, {.9, 1, .9}, {0, .9, 1}}, 0.5).count == 1);
  CHECK_FALSE(numsets(test::response_set({"a", "b"}), mock).bounded01);
}

TEST_CASE("EigV closed forms") {
  CHECK(eigv_uncertainty(SimilarityMatrix::ones(4)).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eigv_uncertainty(SimilarityMatrix::identity(3)).value == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(eigv_uncertainty(SimilarityMatrix::from_blocks({0, 0, 1, 1})).value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(eigv_uncertainty(from_rows(kOracleS)).value == doctest::Approx(1.9069264069264071).epsilon(1e-10));
}

TEST_CASE("Deg closed forms") {
  CHECK(std::abs(deg_uncertainty(SimilarityMatrix::ones(3)).value) <= 1e-9);
  CHECK(std::abs(deg_uncertainty(SimilarityMatrix::identity(3)).value - 2.0 / 3.0) <= 1e-9);
  CHECK(deg_uncertainty(SimilarityMatrix::ones(1)).value == 0.0);
  CHECK(std::abs(deg_uncertainty(from_rows(kOracleS)).value - 0.475) <= 1e-9);
}

TEST_CASE("Ecc closed forms") {
  CHECK(std::abs(ecc_uncertainty(SimilarityMatrix::ones(3)).value) <= 1e-9);
  CHECK(ecc_uncertainty(SimilarityMatrix::from_blocks({0, 0, 1, 1})).value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ecc_uncertainty(from_rows(kOracleS)).value == doctest::Approx(1.4142158982395547).epsilon(1e-9));
  // Every eigenvalue above the cutoff still keeps one vector.
  CHECK(std::isfinite(ecc_uncertainty(SimilarityMatrix::ones(3), 0.0).value));
}

TEST_CASE("MSP and MCSE examples") {
  const auto rs = with_logprobs({"a.", "b."}, {{-2.0, -3.0}, {-1.5, -0.5}});
  CHECK(msp(rs).value == doctest::Approx(2.0));
  CHECK(msp(rs).method == Method::msp);
  CHECK(mcse(rs).value == doctest::Approx(3.5));
  CHECK(mcse(rs, true).value == doctest::Approx(1.75));

  const auto flat = with_logprobs({"a.", "b.", "c."}, {{-3.0}, {-1.0, -2.0}, {-0.5, -0.5, -2.0}});
  CHECK(mcse(flat).value == doctest::Approx(3.0));
  CHECK(mcse(flat, true).value == doctest::Approx((3.0 + 1.5 + 1.0) / 3.0));

  auto missing = test::response_set({"a.", "b."});
  try {
    msp(missing);
    FAIL("expected missing-logprobs");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_logprobs);
  }
}

TEST_CASE("semantic entropy examples") {
  MockScorer mock;
  const auto one = with_logprobs({"He was born in 1950.", "He was born in 1950."}, {{-1.0}, {-2.0}});
  CHECK(semantic_entropy(one, mock).value == doctest::Approx(0.0).epsilon(1e-12));
  const auto two = with_logprobs({"He was born in 1950.", "He was born in 1960."}, {{-1.0}, {-1.0}});
  CHECK(semantic_entropy(two, mock).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const auto four = with_logprobs({"He was born in 1950.", "He was born in 1960.", "He was born in 1970.", "He was born in 1980."},
                                  {{-7.0}, {-7.0}, {-7.0}, {-7.0}});
  CHECK(semantic_entropy(four, mock).value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  // Masses e^-1 and e^-2.
  const auto skew = with_logprobs({"He was born in 1950.", "He was born in 1960."}, {{-1.0}, {-2.0}});
  const double p = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(semantic_entropy(skew, mock).value == doctest::Approx(-p * std::log(p) - (1 - p) * std::log(1 - p)).epsilon(1e-12));
  // Very negative log-likelihoods stay finite.
  const auto tiny = with_logprobs({"He was born in 1950.", "He was born in 1960."}, {{-2000.0}, {-2000.0}});
  CHECK(semantic_entropy(tiny, mock).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const auto bare = test::response_set({"He was born in 1950.", "He was born in 1960."});
  CHECK_THROWS_AS(semantic_entropy(bare, mock), Error);
  SemanticEntropyOptions counts;
  counts.count_fallback = true;
  CHECK(semantic_entropy(bare, mock, counts).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("property: binary block matrices make EigV, Deg and NumSets agree on the block count") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng() % 9;
    const auto labels = random_labels(rng, m);
    const int c = distinct(labels);
    const auto s = SimilarityMatrix::from_blocks(labels);
    CHECK(std::abs(eigv_uncertainty(s).value - c) <= 1e-6);
    CHECK(partition_from_entailment(directional_from(labels, 1.0, 0.0), 0.5).count == c);
    double expected_deg = 0;
    for (std::size_t i = 0; i < m; ++i)
      expected_deg += static_cast<double>(m - std::count(labels.begin(), labels.end(), labels[i]));
    CHECK(std::abs(deg_uncertainty(s).value - expected_deg / static_cast<double>(m * m)) <= 1e-9);
  }
}

TEST_CASE("property: spectral scores move little under a tiny perturbation") {
  std::mt19937_64 rng(59);
  std::uniform_real_distribution<double> d(0.0, 1.0), eps(-1e-6, 1e-6);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 8;
    SimilarityMatrix s(m), t(m);
    for (std::size_t i = 0; i < m; ++i) {
      s(i, i) = t(i, i) = 1.0;
      for (std::size_t j = i + 1; j < m; ++j) {
        s(i, j) = s(j, i) = 0.01 + 0.98 * d(rng);
        t(i, j) = t(j, i) = s(i, j) + eps(rng);
      }
    }
    CHECK(std::abs(eigv_uncertainty(s).value - eigv_uncertainty(t).value) <= 1e-3);
    CHECK(std::abs(deg_uncertainty(s).value - deg_uncertainty(t).value) <= 1e-3);
    // Ecc jumps where an eigenvalue crosses the cutoff; compare away from it.
    const auto spectrum = symmetric_eigen(laplacian(s));
    const bool near_cutoff = std::any_of(spectrum.eigenvalues.begin(), spectrum.eigenvalues.end(),
                                         [](double l) { return std::abs(l - 0.9) < 1e-3; });
    if (!near_cutoff) {
      ++compared;
      CHECK(std::abs(ecc_uncertainty(s).value - ecc_uncertainty(t).value) <= 1e-3);
    }
  }
  CHECK(compared > 150);
}

TEST_CASE("property: numsets ignores the order of responses") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 9;
    std::vector<std::vector<double>> p(m, std::vector<double>(m, 1.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j) p[i][j] = d(rng);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto q = p;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) q[i][j] = p[perm[i]][perm[j]];
    CHECK(partition_from_entailment(p, 0.5).count == partition_from_entailment(q, 0.5).count);
  }
}

TEST_CASE("property: semantic entropy is zero exactly when there is one cluster") {
  MockScorer mock;
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> lp(-20.0, -0.1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 6;
    const auto labels = random_labels(rng, m);
    std::vector<std::string> texts;
    std::vector<std::vector<double>> lps;
    for (int l : labels) {
      texts.push_back("He was born in " + std::to_string(1900 + l) + ".");
      lps.push_back({lp(rng), lp(rng)});
    }
    const double se = semantic_entropy(with_logprobs(texts, lps), mock).value;
    CHECK(se >= 0.0);
    if (distinct(labels) == 1) CHECK(se == 0.0);
    else CHECK(se > 0.0);
  }
}
