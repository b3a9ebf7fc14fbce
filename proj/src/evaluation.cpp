#include "luq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "luq/error.hpp"

namespace luq {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::length_mismatch, "inputs differ in length");
  const std::size_t n = xs.size();
  if (n < 3) throw Error(ErrorCode::insufficient_data, "need at least 3 points");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::constant_input, "correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::length_mismatch, "inputs differ in length");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

std::string_view to_string(CorrelationClass c) {
  switch (c) {
    case CorrelationClass::very_strong: return "very_strong";
    case CorrelationClass::strong: return "strong";
    case CorrelationClass::moderate: return "moderate";
    case CorrelationClass::weak: return "weak";
    case CorrelationClass::very_weak: return "very_weak";
    case CorrelationClass::negligible: return "negligible";
  }
  return "negligible";
}

CorrelationClass classify_correlation(double rho) {
  const double a = std::abs(rho);
  if (!(a <= 1.0)) throw Error(ErrorCode::out_of_range, "correlation outside [-1, 1]");
  if (a > 0.9) return CorrelationClass::very_strong;
  if (a > 0.7) return CorrelationClass::strong;
  if (a > 0.5) return CorrelationClass::moderate;
  if (a > 0.3) return CorrelationClass::weak;
  if (a > 0.1) return CorrelationClass::very_weak;
  return CorrelationClass::negligible;
}

double percent1(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

Aggregates penalized_aggregates(std::span<const JoinedRecord> records, Method method, const AggregateOptions& options) {
  struct Row {
    bool responded;
    double fs;
    double u;
  };
  std::vector<Row> rows;
  bool bounded = true;
  for (const auto& r : records) {
    if (!r.fact.responded) {
      rows.push_back({false, 0.0, 1.0});
      continue;
    }
    const auto* s = r.score(method);
    if (!s) continue;
    bounded = bounded && s->bounded01;
    rows.push_back({true, r.fact.fs, s->value});
  }
  if (rows.empty()) throw Error(ErrorCode::insufficient_data, "no records for " + std::string(to_string(method)));

  if (!bounded && options.normalize_unbounded) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& row : rows)
      if (row.responded) lo = std::min(lo, row.u), hi = std::max(hi, row.u);
    for (auto& row : rows)
      if (row.responded) row.u = hi > lo ? (row.u - lo) / (hi - lo) : 0.0;
    bounded = true;
  }

  Aggregates a;
  a.questions = rows.size();
  double fs_sum = 0.0, us_sum = 0.0, pus_sum = 0.0;
  for (const auto& row : rows) {
    pus_sum += row.u;
    if (!row.responded) continue;
    ++a.responded;
    fs_sum += row.fs;
    us_sum += row.u;
  }
  a.fs = a.responded ? fs_sum / a.responded : NAN;
  a.us = a.responded ? us_sum / a.responded : NAN;
  a.pfs = fs_sum / a.questions;
  a.rr = static_cast<double>(a.responded) / a.questions;
  if (bounded) {
    a.pus = pus_sum / a.questions;
  } else if (options.require_pus) {
    throw Error(ErrorCode::unbounded_method_for_pus,
                std::string(to_string(method)) + " is unbounded; penalized uncertainty needs normalization");
  }
  return a;
}

std::vector<CorrelationRow> correlation_report(std::span<const JoinedRecord> records,
                                               const std::vector<Method>& methods) {
  std::vector<CorrelationRow> out;
  for (Method m : methods) {
    CorrelationRow row;
    row.method = m;
    std::vector<double> us, fs;
    for (const auto& r : records) {
      if (!r.fact.responded) continue;
      if (const auto* s = r.score(m)) {
        us.push_back(s->value);
        fs.push_back(r.fact.fs);
      }
    }
    row.n = us.size();
    try {
      row.pcc = pearson(us, fs);
      row.scc = spearman(us, fs);
      row.category = classify_correlation(*row.pcc);
    } catch (const Error& e) {
      row.pcc.reset();
      row.scc.reset();
      row.category.reset();
      row.note = to_string(e.code());
    }
    out.push_back(std::move(row));
  }
  return out;
}

EnsembleResult ensemble_select(const std::map<std::string, std::vector<JoinedRecord>>& per_model, Method method,
                               const std::vector<std::string>& priority) {
  if (per_model.empty()) throw Error(ErrorCode::insufficient_data, "ensemble needs at least one model");
  std::vector<std::string> order = priority;
  for (const auto& [model, _] : per_model)
    if (std::find(order.begin(), order.end(), model) == order.end()) order.push_back(model);
  std::erase_if(order, [&](const std::string& m) { return !per_model.contains(m); });

  std::map<std::string, std::map<std::string, const JoinedRecord*>> index;
  std::vector<std::string> questions;
  for (const auto& model : order) {
    for (const auto& r : per_model.at(model)) {
      index[model][r.query_id] = &r;
      if (model == order.front()) questions.push_back(r.query_id);
    }
  }
  std::set<std::string> all_ids;
  for (const auto& [model, recs] : index)
    for (const auto& [qid, _] : recs) all_ids.insert(qid);
  for (const auto& qid : all_ids)
    if (std::find(questions.begin(), questions.end(), qid) == questions.end()) questions.push_back(qid);

  EnsembleResult out;
  out.method = method;
  std::vector<JoinedRecord> chosen;
  for (const auto& model : order) out.answer_distribution[model] = 0.0;
  for (const auto& qid : questions) {
    std::optional<EnsembleChoice> best;
    const JoinedRecord* best_record = nullptr;
    for (const auto& model : order) {
      auto it = index[model].find(qid);
      if (it == index[model].end())
        throw Error(ErrorCode::coverage_gap, "model " + model + " has no record for " + qid);
      const JoinedRecord& r = *it->second;
      EnsembleChoice c{qid, model, 1.0, 0.0, r.fact.responded};
      if (r.fact.responded) {
        const auto* s = r.score(method);
        if (!s) throw Error(ErrorCode::coverage_gap, "model " + model + " lacks a score for " + qid);
        c.uncertainty = s->value;
        c.fs = r.fact.fs;
      }
      const bool better = !best || c.uncertainty < best->uncertainty ||
                          (c.uncertainty == best->uncertainty && c.responded && !best->responded);
      if (better) {
        best = c;
        best_record = &r;
      }
    }
    out.choices.push_back(*best);
    out.answer_distribution[best->model_id] += 1.0;
    chosen.push_back(*best_record);
  }
  for (auto& [model, share] : out.answer_distribution) share = 100.0 * share / static_cast<double>(questions.size());
  out.aggregates = penalized_aggregates(chosen, method);
  return out;
}

const std::vector<double>& default_selective_grid() {
  static const std::vector<double> grid{0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0};
  return grid;
}

SelectiveCurve selective_curve(std::span<const JoinedRecord> records, Method method, const std::vector<double>& grid) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0.0 && grid[k] < 100.0)) throw Error(ErrorCode::out_of_range, "percentile outside [0, 100)");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw Error(ErrorCode::invalid_argument, "grid must strictly increase");
  }
  struct Row {
    const std::string* id;
    double fs;
    double u;
  };
  std::vector<Row> rows;
  for (const auto& r : records) {
    if (!r.fact.responded) continue;
    const auto* s = r.score(method);
    if (!s) continue;
    if (!s->bounded01) throw Error(ErrorCode::invalid_argument, "selective answering needs a bounded uncertainty");
    rows.push_back({&r.query_id, r.fact.fs, s->value});
  }
  // Most uncertain first; equal scores abstain in query_id order.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.u != b.u) return a.u > b.u;
    return *a.id < *b.id;
  });

  SelectiveCurve curve;
  curve.method = method;
  const std::size_t q = rows.size();
  for (double p : grid) {
    const auto drop = static_cast<std::size_t>(std::ceil(p * static_cast<double>(q) / 100.0 - 1e-9));
    if (drop >= q) throw Error(ErrorCode::empty_retained_set, "nothing left at percentile " + std::to_string(p));
    SelectivePoint pt{p, drop, q - drop, 0.0, 0.0};
    for (std::size_t i = drop; i < q; ++i) {
      pt.fs += rows[i].fs;
      pt.us += rows[i].u;
    }
    pt.fs /= static_cast<double>(pt.retained);
    pt.us /= static_cast<double>(pt.retained);
    curve.points.push_back(pt);
  }
  return curve;
}

std::vector<FrequencyBucket> frequency_report(std::span<const JoinedRecord> records, Method method) {
  std::map<FrequencyLabel, FrequencyBucket> buckets;
  std::map<FrequencyLabel, std::size_t> scored;
  for (const auto& r : records) {
    if (!r.fact.responded || r.frequency == FrequencyLabel::unknown) continue;
    auto& b = buckets[r.frequency];
    b.label = r.frequency;
    ++b.count;
    b.fs += r.fact.fs;
    if (const auto* s = r.score(method)) {
      b.us = b.us.value_or(0.0) + s->value;
      ++scored[r.frequency];
    }
  }
  if (buckets.empty()) throw Error(ErrorCode::all_unknown, "no responded record has a frequency label");
  std::vector<FrequencyBucket> out;
  for (auto& [label, b] : buckets) {
    b.fs /= static_cast<double>(b.count);
    if (b.us) *b.us /= static_cast<double>(scored[label]);
    out.push_back(b);
  }
  return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

Json pct(double fraction) { return std::isnan(fraction) ? Json(nullptr) : Json(percent1(fraction)); }

}  // namespace

Json to_json_value(const Aggregates& a) {
  return Json{{"FS", pct(a.fs)},
              {"PFS", pct(a.pfs)},
              {"US", pct(a.us)},
              {"PUS", a.pus ? pct(*a.pus) : Json(nullptr)},
              {"RR", pct(a.rr)},
              {"questions", a.questions},
              {"responded", a.responded}};
}

Json to_json_value(const CorrelationRow& r) {
  Json j{{"method", to_string(r.method)}, {"n", r.n}};
  j["PCC"] = r.pcc ? pct(*r.pcc) : Json(nullptr);
  j["SCC"] = r.scc ? pct(*r.scc) : Json(nullptr);
  j["category"] = r.category ? Json(to_string(*r.category)) : Json(nullptr);
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

Json to_json_value(const EnsembleResult& e) {
  Json choices = Json::array();
  for (const auto& c : e.choices)
    choices.push_back(Json{{"query_id", c.query_id},
                           {"model_id", c.model_id},
                           {"uncertainty", c.uncertainty},
                           {"fs", c.fs},
                           {"responded", c.responded}});
  // Largest-remainder rounding to tenths so the shares still total 100.0.
  std::vector<std::pair<std::string, double>> shares(e.answer_distribution.begin(), e.answer_distribution.end());
  std::vector<long> tenths;
  long assigned = 0;
  for (const auto& [_, share] : shares) {
    tenths.push_back(static_cast<long>(std::floor(share * 10.0 + 1e-9)));
    assigned += tenths.back();
  }
  std::vector<std::size_t> by_remainder(shares.size());
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
    return shares[a].second * 10.0 - tenths[a] > shares[b].second * 10.0 - tenths[b];
  });
  for (std::size_t k = 0; assigned < 1000 && !shares.empty(); k = (k + 1) % shares.size(), ++assigned)
    ++tenths[by_remainder[k]];
  Json dist = Json::object();
  for (std::size_t k = 0; k < shares.size(); ++k) dist[shares[k].first] = static_cast<double>(tenths[k]) / 10.0;
  return Json{{"method", to_string(e.method)},
              {"aggregates", to_json_value(e.aggregates)},
              {"answer_distribution", dist},
              {"choices", choices}};
}

Json to_json_value(const SelectiveCurve& c) {
  Json points = Json::array();
  for (const auto& p : c.points)
    points.push_back(Json{{"percentile", p.percentile},
                          {"abstained", p.abstained},
                          {"retained", p.retained},
                          {"FS", pct(p.fs)},
                          {"US", pct(p.us)}});
  return Json{{"method", to_string(c.method)}, {"points", points}};
}

Json to_json_value(const std::vector<FrequencyBucket>& buckets) {
  Json out = Json::array();
  for (const auto& b : buckets)
    out.push_back(Json{{"frequency", to_string(b.label)},
                       {"count", b.count},
                       {"FS", pct(b.fs)},
                       {"US", b.us ? pct(*b.us) : Json(nullptr)}});
  return out;
}

}  // namespace luq
