#pragma once

// Test doubles and fixtures shared by the unit, integration and acceptance suites.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "luq/domain.hpp"
#include "luq/entailment.hpp"
#include "luq/sampling.hpp"

namespace luq::test {

/// Logits whose two-class entailment probability is p (p in (0,1)); p = 1 and
/// p = 0 map to a gap of 60, which is 1 within 1e-26.
inline EntailmentJudgment judgment_for(double p) {
  if (p >= 1.0) return {30.0, 0.0, -30.0};
  if (p <= 0.0) return {-30.0, 0.0, 30.0};
  return {std::log(p / (1.0 - p)), 0.0, 0.0};
}

/// Returns a fixed judgment per (hypothesis, premise); unknown pairs are neutral
/// (p = 0.5). Counts calls and pairs.
class ScriptedScorer : public EntailmentScorer {
 public:
  void set(const std::string& hypothesis, const std::string& premise, double p) {
    table_[{hypothesis, premise}] = judgment_for(p);
  }
  void set_judgment(const std::string& hypothesis, const std::string& premise, EntailmentJudgment j) {
    table_[{hypothesis, premise}] = j;
  }
  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override {
    ++calls;
    pairs_seen += static_cast<long>(pairs.size());
    std::vector<EntailmentJudgment> out;
    for (const auto& p : pairs) {
      auto it = table_.find({p.hypothesis, p.premise});
      out.push_back(it == table_.end() ? fallback : it->second);
    }
    return out;
  }
  std::string id() const override { return "scripted"; }

  EntailmentJudgment fallback{0.0, 0.0, 0.0};
  std::atomic<long> calls{0};
  std::atomic<long> pairs_seen{0};

 private:
  std::map<std::pair<std::string, std::string>, EntailmentJudgment> table_;
};

/// Wraps a scorer, counting batches and pairs and recording batch sizes.
class CountingScorer : public EntailmentScorer {
 public:
  explicit CountingScorer(EntailmentScorer& inner) : inner_(inner) {}
  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override {
    std::lock_guard lock(mutex_);
    batch_sizes.push_back(pairs.size());
    for (const auto& p : pairs) seen.push_back(p);
    return inner_.score_batch(pairs);
  }
  std::string id() const override { return inner_.id(); }
  std::optional<std::size_t> max_premise_length() const override { return max_premise; }

  std::vector<std::size_t> batch_sizes;
  std::vector<TextPair> seen;
  std::optional<std::size_t> max_premise;

 private:
  EntailmentScorer& inner_;
  std::mutex mutex_;
};

/// Multiplies the entail/contradict gap of every judgment by `factor`.
class ScaledScorer : public EntailmentScorer {
 public:
  ScaledScorer(EntailmentScorer& inner, double factor) : inner_(inner), factor_(factor) {}
  std::vector<EntailmentJudgment> score_batch(std::span<const TextPair> pairs) override {
    auto out = inner_.score_batch(pairs);
    for (auto& j : out) {
      const double mid = 0.5 * (j.entail + j.contradict);
      j.entail = mid + factor_ * (j.entail - mid);
      j.contradict = mid + factor_ * (j.contradict - mid);
    }
    return out;
  }
  std::string id() const override { return inner_.id() + "*scaled"; }

 private:
  EntailmentScorer& inner_;
  double factor_;
};

/// Chat provider answering from a function of the request; counts calls.
class FakeProvider : public ChatProvider {
 public:
  using Fn = std::function<ChatCompletion(const ChatRequest&)>;
  explicit FakeProvider(Fn fn) : fn_(std::move(fn)) {}
  ChatCompletion complete(const ChatRequest& request) override {
    ++calls;
    return fn_(request);
  }
  std::atomic<int> calls{0};

 private:
  Fn fn_;
};

inline Response response(std::string text, bool refusal = false) {
  Response r;
  r.text = std::move(text);
  r.is_refusal = refusal;
  return r;
}

inline ResponseSet response_set(std::vector<std::string> texts, std::string id = "q1") {
  ResponseSet rs;
  rs.query = {id, "Entity", "Tell me a short bio of the person Entity.", FrequencyLabel::unknown};
  rs.model_id = "model";
  rs.main = response(texts.front());
  for (std::size_t i = 1; i < texts.size(); ++i) rs.samples.push_back(response(texts[i]));
  return rs;
}

/// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("luq-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Definitional Pearson: sums of products of deviations, no shortcuts.
inline double brute_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Mean ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++smaller;
      if (v == x[i]) ++equal;
    }
    r[i] = 1.0 + smaller + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return brute_pearson(brute_ranks(x), brute_ranks(y));
}

}  // namespace luq::test
