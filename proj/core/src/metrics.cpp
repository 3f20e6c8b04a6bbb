#include "ser/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <set>

#include "ser/error.h"

namespace ser {

void validate_prediction(const ScoredPrediction& p) {
  double sum = 0.0;
  for (double v : p.probs) {
    if (!std::isfinite(v) || v < 0.0) throw Error("prediction '" + p.id + "' has an invalid probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error("probabilities of '" + p.id + "' do not sum to 1");
}

int predicted_class(const ScoredPrediction& p) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(kNumClasses); ++k) {
    if (p.probs[static_cast<std::size_t>(k)] > p.probs[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

RecallResult recall_metrics(const std::vector<ScoredPrediction>& preds) {
  RecallResult r;
  std::array<std::size_t, kNumClasses> correct{};
  for (const auto& p : preds) {
    const auto y = static_cast<std::size_t>(index_of(p.label));
    ++r.n[y];
    if (predicted_class(p) == static_cast<int>(y)) ++correct[y];
  }
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    if (r.n[k] == 0) throw Error("class '" + std::string(to_string(emotion_from_index(static_cast<int>(k)))) +
                                 "' has no instances");
    r.recall[k] = static_cast<double>(correct[k]) / static_cast<double>(r.n[k]);
    r.av_rec += r.recall[k];
  }
  r.av_rec /= static_cast<double>(kNumClasses);
  return r;
}

double pair_auc(const std::vector<double>& positive, const std::vector<double>& negative) {
  if (positive.empty() || negative.empty()) throw Error("AUC needs at least one positive and one negative");
  std::vector<double> neg = negative;
  std::sort(neg.begin(), neg.end());
  // Twice the statistic in integers: 2 * greater + ties.
  std::uint64_t twice = 0;
  for (double s : positive) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(lo, neg.end(), s);
    twice += 2 * static_cast<std::uint64_t>(lo - neg.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(positive.size()) * static_cast<double>(negative.size());
  return static_cast<double>(twice) / (2.0 * pairs);
}

AucResult auc_metrics(const std::vector<ScoredPrediction>& preds) {
  AucResult r;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    std::vector<double> pos, neg;
    for (const auto& p : preds) {
      (static_cast<std::size_t>(index_of(p.label)) == k ? pos : neg).push_back(p.probs[k]);
    }
    if (pos.empty() || neg.empty()) {
      throw Error("class '" + std::string(to_string(emotion_from_index(static_cast<int>(k)))) +
                  "' is degenerate for AUC");
    }
    r.auc[k] = pair_auc(pos, neg);
    r.av_auc += r.auc[k];
  }
  r.av_auc /= static_cast<double>(kNumClasses);
  return r;
}

MetricReport evaluate_predictions(const std::vector<ScoredPrediction>& preds) {
  for (const auto& p : preds) validate_prediction(p);
  const auto rec = recall_metrics(preds);
  const auto auc = auc_metrics(preds);
  MetricReport m;
  m.recall = rec.recall;
  m.av_rec = rec.av_rec;
  m.n = rec.n;
  m.auc = auc.auc;
  m.av_auc = auc.av_auc;
  return m;
}

std::vector<ScoredPrediction> merge_fold_scores(const std::vector<std::vector<ScoredPrediction>>& fold_preds) {
  std::vector<ScoredPrediction> pool;
  std::set<std::string> seen;
  for (const auto& fold : fold_preds) {
    for (const auto& p : fold) {
      if (!seen.insert(p.id).second) throw Error("utterance '" + p.id + "' is scored in more than one fold");
      pool.push_back(p);
    }
  }
  return pool;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error("cannot summarize an empty list");
  Summary s;
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

SeedAggregate aggregate_seeds(const std::vector<MetricReport>& per_seed) {
  if (per_seed.empty()) throw Error("no per-seed reports to aggregate");
  SeedAggregate a;
  for (const auto& r : per_seed) {
    a.av_rec.push_back(r.av_rec);
    a.av_auc.push_back(r.av_auc);
  }
  a.rec = summarize(a.av_rec);
  a.auc = summarize(a.av_auc);
  return a;
}

namespace {

nlohmann::ordered_json summary_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["median"] = s.median;
  j["q1"] = s.q1;
  j["q3"] = s.q3;
  j["iqr"] = s.iqr();
  j["min"] = s.min;
  j["max"] = s.max;
  return j;
}

}  // namespace

std::string metric_report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const std::string name(to_string(emotion_from_index(static_cast<int>(k))));
    j["classes"][name] = {{"n", report.n[k]}, {"recall", report.recall[k]}, {"auc", report.auc[k]}};
  }
  j["av_rec"] = report.av_rec;
  j["av_auc"] = report.av_auc;
  return j.dump(2) + "\n";
}

std::string seed_aggregate_json(const SeedAggregate& agg) {
  nlohmann::ordered_json j;
  j["av_rec"] = summary_json(agg.rec);
  j["av_auc"] = summary_json(agg.auc);
  j["per_seed_av_rec"] = agg.av_rec;
  j["per_seed_av_auc"] = agg.av_auc;
  return j.dump(2) + "\n";
}

std::string serialize_prediction(const ScoredPrediction& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["label"] = std::string(to_string(p.label));
  j["probs"] = std::vector<double>(p.probs.begin(), p.probs.end());
  return j.dump();
}

ScoredPrediction parse_prediction(const std::string& line) try {
  const auto j = nlohmann::json::parse(line);
  ScoredPrediction p;
  p.id = j.at("id").get<std::string>();
  const auto label = parse_emotion(j.at("label").get<std::string>());
  if (!label) throw Error("prediction '" + p.id + "' has an unknown label");
  p.label = *label;
  const auto probs = j.at("probs").get<std::vector<double>>();
  if (probs.size() != kNumClasses) throw Error("prediction '" + p.id + "' needs 4 probabilities");
  std::copy(probs.begin(), probs.end(), p.probs.begin());
  return p;
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed prediction: ") + e.what());
}

}  // namespace ser
