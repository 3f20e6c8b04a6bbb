#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ser/labels.h"

namespace ser {

struct ScoredPrediction {
  std::string id;
  std::array<double, kNumClasses> probs{};
  Emotion label = Emotion::kNeutral;
};

/// Throws ser::Error unless probs are finite, non-negative and sum to 1
/// within 1e-6.
void validate_prediction(const ScoredPrediction& p);

/// Lowest index wins ties.
int predicted_class(const ScoredPrediction& p);

struct RecallResult {
  std::array<double, kNumClasses> recall{};
  double av_rec = 0.0;
  std::array<std::size_t, kNumClasses> n{};
};

struct AucResult {
  std::array<double, kNumClasses> auc{};
  double av_auc = 0.0;
};

/// Throws ser::Error when a class has no instances.
RecallResult recall_metrics(const std::vector<ScoredPrediction>& preds);
/// One-vs-all Mann-Whitney statistic on probs[k]; ties count one half.
/// Throws ser::Error when a class has no positives or no negatives.
AucResult auc_metrics(const std::vector<ScoredPrediction>& preds);

/// Exact pair statistic for one binary problem, computed by sorting.
double pair_auc(const std::vector<double>& positive, const std::vector<double>& negative);

struct MetricReport {
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> auc{};
  double av_rec = 0.0;
  double av_auc = 0.0;
  std::array<std::size_t, kNumClasses> n{};
};

MetricReport evaluate_predictions(const std::vector<ScoredPrediction>& preds);

/// Concatenates per-fold predictions; throws on an id repeated across folds.
std::vector<ScoredPrediction> merge_fold_scores(const std::vector<std::vector<ScoredPrediction>>& fold_preds);

struct Summary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double iqr() const { return q3 - q1; }
};

/// Linear-interpolation quantile (h = (n - 1) p). Throws on an empty input.
double quantile(std::vector<double> values, double p);
Summary summarize(const std::vector<double>& values);

struct SeedAggregate {
  std::vector<double> av_rec;  // per seed, in seed order
  std::vector<double> av_auc;
  Summary rec;
  Summary auc;
};

/// Throws ser::Error on an empty list.
SeedAggregate aggregate_seeds(const std::vector<MetricReport>& per_seed);

std::string metric_report_json(const MetricReport& report);
std::string seed_aggregate_json(const SeedAggregate& agg);

std::string serialize_prediction(const ScoredPrediction& p);
ScoredPrediction parse_prediction(const std::string& line);

}  // namespace ser
