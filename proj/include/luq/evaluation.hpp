#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "luq/domain.hpp"

namespace luq {

/// Product-moment correlation. Throws Error(length_mismatch),
/// Error(insufficient_data) below three points, Error(constant_input).
double pearson(std::span<const double> xs, std::span<const double> ys);
/// Pearson correlation of average ranks (ties share their mean rank).
double spearman(std::span<const double> xs, std::span<const double> ys);
/// 1-based ranks; tied values receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> xs);

enum class CorrelationClass { very_strong, strong, moderate, weak, very_weak, negligible };
std::string_view to_string(CorrelationClass c);
/// Classes by |rho| on half-open intervals; a boundary value belongs to the
/// lower class (0.7 is moderate). Throws Error(out_of_range) for |rho| > 1.
CorrelationClass classify_correlation(double rho);

/// Fraction in [0,1] rendered as a percentage with one decimal.
double percent1(double fraction);

struct JoinedRecord {
  std::string query_id;
  std::string model_id;
  std::map<Method, UncertaintyScore> scores;
  FactualityRecord fact;
  FrequencyLabel frequency = FrequencyLabel::unknown;

  const UncertaintyScore* score(Method m) const {
    auto it = scores.find(m);
    return it == scores.end() ? nullptr : &it->second;
  }
};

struct Aggregates {
  double fs = 0.0;
  double pfs = 0.0;
  double us = 0.0;
  std::optional<double> pus;  // absent for unbounded methods unless normalized
  double rr = 0.0;
  std::size_t questions = 0;
  std::size_t responded = 0;
};

struct AggregateOptions {
  /// Min-max scale unbounded scores over the responded questions so PUS exists.
  bool normalize_unbounded = false;
  /// When false an unbounded method yields no PUS instead of throwing.
  bool require_pus = true;
};

/// FS/US over responded questions; PFS/PUS over all questions with each
/// refusal counted as (fs 0, uncertainty 1); RR the responded fraction.
/// Responded questions without a score for `method` are left out.
/// Throws Error(unbounded_method_for_pus) for unbounded scores unless normalized.
Aggregates penalized_aggregates(std::span<const JoinedRecord> records, Method method,
                                const AggregateOptions& options = {});

struct CorrelationRow {
  Method method = Method::luq;
  std::size_t n = 0;
  std::optional<double> pcc;
  std::optional<double> scc;
  std::optional<CorrelationClass> category;  // from PCC
  std::string note;
};

/// Uncertainty vs raw fs over responded questions, one row per method.
/// Methods with too few points or constant input get a note and no values.
std::vector<CorrelationRow> correlation_report(std::span<const JoinedRecord> records,
                                               const std::vector<Method>& methods);

struct EnsembleChoice {
  std::string query_id;
  std::string model_id;
  double uncertainty = 1.0;
  double fs = 0.0;
  bool responded = false;
};

struct EnsembleResult {
  Method method = Method::luq;
  std::vector<EnsembleChoice> choices;
  Aggregates aggregates;
  std::map<std::string, double> answer_distribution;  // percent of questions per model
};

/// Per question, the model with the lowest uncertainty answers (a refusal
/// counts as 1). Ties prefer an actual answer, then `priority` order (the
/// map order when empty). Throws Error(coverage_gap) when a model misses a
/// question or a responded record lacks the method's score.
EnsembleResult ensemble_select(const std::map<std::string, std::vector<JoinedRecord>>& per_model, Method method,
                               const std::vector<std::string>& priority = {});

struct SelectivePoint {
  double percentile = 0.0;
  std::size_t abstained = 0;
  std::size_t retained = 0;
  double fs = 0.0;
  double us = 0.0;
};

struct SelectiveCurve {
  Method method = Method::luq;
  std::vector<SelectivePoint> points;
};

const std::vector<double>& default_selective_grid();

/// At percentile p the ceil(p% of Q) most uncertain responded questions are
/// abstained (ties abstain the smaller query_id first); means of fs and
/// uncertainty over the rest. Throws Error(empty_retained_set).
SelectiveCurve selective_curve(std::span<const JoinedRecord> records, Method method,
                               const std::vector<double>& grid = default_selective_grid());

struct FrequencyBucket {
  FrequencyLabel label = FrequencyLabel::unknown;
  std::size_t count = 0;
  double fs = 0.0;
  std::optional<double> us;
};

/// Responded questions grouped by frequency label, rare to frequent; unknown
/// and empty buckets omitted. Throws Error(all_unknown).
std::vector<FrequencyBucket> frequency_report(std::span<const JoinedRecord> records, Method method);

Json to_json_value(const Aggregates& a);
Json to_json_value(const CorrelationRow& r);
Json to_json_value(const EnsembleResult& e);
Json to_json_value(const SelectiveCurve& c);
Json to_json_value(const std::vector<FrequencyBucket>& buckets);

}  // namespace luq
