#include <gtest/gtest.h>

#include <cmath>

#include "ser/error.h"
#include "ser/metrics.h"
#include "ser/random.h"

namespace ser {
namespace {

ScoredPrediction pred(const std::string& id, std::array<double, 4> p, int label) {
  return {id, p, emotion_from_index(label)};
}

// O(n^2) pair count with ties worth one half, kept in integer halves.
double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  long long halves = 0;
  for (double p : pos)
    for (double n : neg) halves += p > n ? 2 : (p == n ? 1 : 0);
  return static_cast<double>(halves) / (2.0 * static_cast<double>(pos.size() * neg.size()));
}

TEST(Recall, HandWorkedConfusion) {
  // counts {2,2,2,2}, correct {2,1,0,2}
  std::vector<ScoredPrediction> p = {
      pred("a", {.7, .1, .1, .1}, 0), pred("b", {.6, .2, .1, .1}, 0),
      pred("c", {.1, .7, .1, .1}, 1), pred("d", {.7, .1, .1, .1}, 1),
      pred("e", {.1, .1, .1, .7}, 2), pred("f", {.1, .7, .1, .1}, 2),
      pred("g", {.1, .1, .1, .7}, 3), pred("h", {.2, .2, .1, .5}, 3)};
  const auto r = recall_metrics(p);
  EXPECT_EQ(r.recall, (std::array<double, 4>{1.0, 0.5, 0.0, 1.0}));
  EXPECT_EQ(r.av_rec, 0.625);
  EXPECT_EQ(r.n, (std::array<std::size_t, 4>{2, 2, 2, 2}));
}

TEST(Recall, PerfectAndTies) {
  std::vector<ScoredPrediction> perfect, uniform;
  for (int k = 0; k < 4; ++k) {
    std::array<double, 4> one{};
    one[k] = 1.0;
    perfect.push_back(pred("p" + std::to_string(k), one, k));
    uniform.push_back(pred("u" + std::to_string(k), {.25, .25, .25, .25}, k));
  }
  EXPECT_EQ(recall_metrics(perfect).av_rec, 1.0);
  EXPECT_EQ(recall_metrics(uniform).av_rec, 0.25);
  EXPECT_EQ(predicted_class(uniform[2]), 0);
  EXPECT_EQ(predicted_class(pred("t", {.1, .4, .4, .1}, 0)), 1);
  uniform.pop_back();
  EXPECT_THROW(recall_metrics(uniform), Error);
}

TEST(Recall, RandomClassifierNearChance) {
  Rng rng(1);
  std::vector<ScoredPrediction> p;
  for (int i = 0; i < 10000; ++i) {
    std::array<double, 4> s{};
    double sum = 0.0;
    for (auto& v : s) sum += v = rng.uniform();
    for (auto& v : s) v /= sum;
    p.push_back(pred(std::to_string(i), s, i % 4));
  }
  EXPECT_NEAR(recall_metrics(p).av_rec, 0.25, 0.02);
}

TEST(Recall, ArgmaxInvariantToRowScaling) {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    std::array<double, 4> s{};
    for (auto& v : s) v = rng.uniform();
    auto scaled = s;
    const double c = 0.1 + 10.0 * rng.uniform();
    for (auto& v : scaled) v *= c;
    EXPECT_EQ(predicted_class(pred("x", s, 0)), predicted_class(pred("x", scaled, 0)));
  }
}

TEST(Auc, HandExamples) {
  EXPECT_EQ(pair_auc({0.9, 0.8}, {0.2, 0.1}), 1.0);
  EXPECT_EQ(pair_auc({0.8, 0.4}, {0.6, 0.2}), 0.75);
  EXPECT_EQ(pair_auc({0.5}, {0.5}), 0.5);
  EXPECT_EQ(pair_auc({0.1}, {0.9}), 0.0);
}

TEST(Auc, MatchesBruteForceWithTies) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(199);
    std::vector<double> pos, neg;
    const std::size_t levels = 1 + rng.uniform_int(12);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = rng.bernoulli(0.5) ? static_cast<double>(rng.uniform_int(levels)) / levels : rng.uniform();
      (rng.bernoulli(0.4) ? pos : neg).push_back(s);
    }
    if (pos.empty()) pos.push_back(0.5);
    if (neg.empty()) neg.push_back(0.5);
    ASSERT_EQ(pair_auc(pos, neg), brute_auc(pos, neg)) << trial;
  }
}

TEST(Auc, InvariantUnderMonotoneTransforms) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pos(1 + rng.uniform_int(30)), neg(1 + rng.uniform_int(30));
    for (auto& v : pos) v = std::round(rng.uniform() * 20) / 20;
    for (auto& v : neg) v = std::round(rng.uniform() * 20) / 20;
    auto f = [](double x) { return std::exp(3 * x) - 7.0; };
    std::vector<double> tp, tn;
    for (double v : pos) tp.push_back(f(v));
    for (double v : neg) tn.push_back(f(v));
    EXPECT_EQ(pair_auc(pos, neg), pair_auc(tp, tn));
  }
}

TEST(Auc, OneVsAllAveragesAndDegenerateClasses) {
  std::vector<ScoredPrediction> p = {pred("a", {.7, .1, .1, .1}, 0), pred("b", {.1, .7, .1, .1}, 1),
                                     pred("c", {.1, .1, .7, .1}, 2), pred("d", {.1, .1, .1, .7}, 3)};
  const auto r = auc_metrics(p);
  EXPECT_EQ(r.av_auc, 1.0);
  for (double a : r.auc) EXPECT_EQ(a, 1.0);
  p.pop_back();
  EXPECT_THROW(auc_metrics(p), Error);
}

TEST(Auc, MetricsMatchBruteForceOnRandomSets) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredPrediction> p;
    const std::size_t n = 8 + rng.uniform_int(193);
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 4> s{};
      double sum = 0.0;
      for (auto& v : s) sum += v = 1.0 + static_cast<double>(rng.uniform_int(5));
      for (auto& v : s) v /= sum;
      p.push_back(pred(std::to_string(i), s, static_cast<int>(i < 4 ? i : rng.uniform_int(4))));
    }
    const auto r = auc_metrics(p);
    double mean = 0.0;
    for (int k = 0; k < 4; ++k) {
      std::vector<double> pos, neg;
      for (const auto& x : p) (index_of(x.label) == k ? pos : neg).push_back(x.probs[k]);
      EXPECT_EQ(r.auc[k], brute_auc(pos, neg));
      mean += r.auc[k];
    }
    EXPECT_DOUBLE_EQ(r.av_auc, mean / 4);
  }
}

TEST(Validate, Probabilities) {
  EXPECT_NO_THROW(validate_prediction(pred("a", {.25, .25, .25, .25}, 0)));
  EXPECT_THROW(validate_prediction(pred("a", {.5, .5, .5, .5}, 0)), Error);
  EXPECT_THROW(validate_prediction(pred("a", {1.5, -.5, 0, 0}, 0)), Error);
  EXPECT_THROW(validate_prediction(pred("a", {NAN, 1, 0, 0}, 0)), Error);
}

TEST(Merge, PoolsFoldsAndRejectsDuplicates) {
  std::vector<std::vector<ScoredPrediction>> folds(5);
  for (int f = 0; f < 5; ++f)
    for (int i = 0; i < 10; ++i) folds[f].push_back(pred(std::to_string(f * 10 + i), {.25, .25, .25, .25}, i % 4));
  EXPECT_EQ(merge_fold_scores(folds).size(), 50u);
  folds[3][0].id = "0";
  EXPECT_THROW(merge_fold_scores(folds), Error);
}

TEST(Merge, PooledAucDiffersFromMeanOfFolds) {
  // Fold A scores live in [0, 0.5), fold B in [0.5, 1]; each separates
  // perfectly on its own but the pool interleaves them.
  auto binary = [](double s, int label, const std::string& id) {
    return pred(id, {s, (1 - s) / 3, (1 - s) / 3, (1 - s) / 3}, label);
  };
  std::vector<ScoredPrediction> a = {binary(0.4, 0, "a1"), binary(0.1, 1, "a2"), binary(0.1, 2, "a3"),
                                     binary(0.1, 3, "a4")};
  std::vector<ScoredPrediction> b = {binary(0.9, 0, "b1"), binary(0.6, 1, "b2"), binary(0.6, 2, "b3"),
                                     binary(0.6, 3, "b4")};
  const double fa = auc_metrics(a).auc[0], fb = auc_metrics(b).auc[0];
  const double pooled = auc_metrics(merge_fold_scores({a, b})).auc[0];
  EXPECT_EQ(fa, 1.0);
  EXPECT_EQ(fb, 1.0);
  EXPECT_LT(pooled, 1.0);
}

TEST(Aggregate, QuantileConventions) {
  EXPECT_EQ(summarize({1, 2, 3, 4, 5}).median, 3.0);
  EXPECT_EQ(summarize({4, 1, 3, 2}).median, 2.5);
  const auto one = summarize({0.7});
  EXPECT_EQ(one.median, 0.7);
  EXPECT_EQ(one.iqr(), 0.0);
  const auto s = summarize({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 4.0);
  EXPECT_DOUBLE_EQ(quantile({10, 20, 30}, 0.25), 15.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Aggregate, SeedsInOrder) {
  std::vector<MetricReport> r(3);
  r[0].av_auc = 0.7;
  r[1].av_auc = 0.9;
  r[2].av_auc = 0.8;
  r[0].av_rec = 0.5;
  const auto agg = aggregate_seeds(r);
  EXPECT_EQ(agg.av_auc, (std::vector<double>{0.7, 0.9, 0.8}));
  EXPECT_EQ(agg.auc.median, 0.8);
  EXPECT_GE(agg.auc.median, agg.auc.min);
  EXPECT_LE(agg.auc.median, agg.auc.max);
  EXPECT_GE(agg.auc.iqr(), 0.0);
  EXPECT_THROW(aggregate_seeds({}), Error);
}

TEST(Serialization, PredictionRoundTrip) {
  const auto p = pred("utt7", {0.1, 0.2, 0.3, 0.4}, 2);
  const auto back = parse_prediction(serialize_prediction(p));
  EXPECT_EQ(back.id, p.id);
  EXPECT_EQ(back.probs, p.probs);
  EXPECT_EQ(back.label, p.label);
  EXPECT_THROW(parse_prediction(R"({"id":"x","probs":[1,0,0,0],"label":"fear"})"), Error);
  EXPECT_THROW(parse_prediction("{"), Error);
}

}  // namespace
}  // namespace ser
