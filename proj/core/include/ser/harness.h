#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ser/config.h"
#include "ser/dataset.h"
#include "ser/folds.h"
#include "ser/metrics.h"
#include "ser/models.h"
#include "ser/nn/checkpoint.h"

namespace ser {

struct TrainLog {
  std::size_t epochs = 0;
  std::size_t steps = 0;
  double final_loss = 0.0;  // mean over the last epoch
  TruncationCount truncated;
};

struct TrainOutput {
  nn::Checkpoint checkpoint;
  std::vector<ScoredPrediction> predictions;  // test set, id order
  /// Test predictions after each requested epoch count.
  std::map<std::size_t, std::vector<ScoredPrediction>> snapshots;
  TrainLog log;
};

/// Everything one training run needs besides the data.
struct TrainRequest {
  SystemKind system = SystemKind::kEfCs;
  ModelConfig model;
  nn::LrSchedule lr;
  std::size_t epochs = 0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  PretrainedBranches pretrained;
  std::vector<std::size_t> snapshot_epochs;
  /// JSON object stored under "meta" in the checkpoint header.
  std::string meta_json = "{}";
};

/// Builds, freezes, and trains a model with seeded shuffling, then scores
/// the fold's test set in eval mode from the float-rounded weights (the same
/// weights the checkpoint holds).
TrainOutput train_model(const TrainRequest& request, const FoldData& data);

/// Normalization statistics stored in a checkpoint by train_model (present
/// when the model was trained from a raw descriptor cache).
std::optional<dsp::NormStats> checkpoint_norm_stats(const nn::Checkpoint& ckpt);

/// Eval-mode probabilities in example order. Bitwise reproducible for a
/// fixed batch size; other batchings agree to rounding.
std::vector<ScoredPrediction> predict(ModelGraph& model, const std::vector<Example>& examples,
                                      std::size_t batch_size);

struct RunRecord {
  std::string label;
  std::string system;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<MetricReport> per_seed;
  SeedAggregate aggregate;
};

std::string run_record_json(const RunRecord& record);
RunRecord parse_run_record(std::string_view json);
RunRecord load_run_record(const std::filesystem::path& run_dir);

struct EpochSelection {
  std::size_t best = 0;
  std::vector<std::size_t> candidates;
  /// Median merged-fold AvAUC per candidate.
  std::vector<double> median_auc;
  /// [candidate][seed]
  std::vector<std::vector<double>> per_seed_auc;
};

/// Argmax of the per-candidate median; ties go to the smallest epoch count.
std::size_t choose_epoch(const std::vector<std::size_t>& candidates,
                         const std::vector<std::vector<double>>& per_seed_auc);

/// Orchestrates the (fold, seed) jobs of one configuration. Outputs live
/// under run_directory(config):
///   config.json, folds.jsonl, jobs/fold<f>-seed<s>/{model.ckpt, log.json,
///   predictions.jsonl}, branches/, seeds/seed<s>.json, record.json
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return cfg_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }
  const FoldAssignment& folds() const { return folds_; }
  const Dataset& dataset() const { return data_; }

  /// Trains one job in memory. PT/WS branch checkpoints come from
  /// paths.pretrained_dir or are trained for this fold and seed.
  TrainOutput train_single(std::size_t fold, std::uint64_t seed);

  /// Runs (or resumes) one job and persists it. Returns its predictions.
  std::vector<ScoredPrediction> run_job(std::size_t fold, std::uint64_t seed);

  /// Every fold for every seed on config.workers threads; completed jobs
  /// are reused. Aggregates in sorted (seed, fold) order.
  RunRecord run(std::ostream* progress = nullptr);

  EpochSelection select_epochs(const std::vector<std::size_t>& candidates,
                               const std::vector<std::uint64_t>& selection_seeds);

  /// Number of jobs (fusion or branch) trained by this object.
  std::size_t trained_jobs() const { return trained_jobs_.load(); }

  std::filesystem::path job_dir(std::size_t fold, std::uint64_t seed) const;
  /// Load (or train and cache) the branch checkpoint of `branch` for the
  /// job; verifies that it was trained on exactly this fold's training ids.
  nn::Checkpoint branch_checkpoint(SystemKind branch, std::size_t fold, std::uint64_t seed);

 private:
  const FoldData& fold_data(std::size_t fold);
  TrainRequest request_for(SystemKind system, std::size_t fold, std::uint64_t seed, std::size_t epochs) const;

  ExperimentConfig cfg_;
  std::filesystem::path run_dir_;
  Dataset data_;
  FoldAssignment folds_;
  std::vector<std::unique_ptr<FoldData>> fold_data_;
  std::unique_ptr<std::once_flag[]> fold_once_;
  std::atomic<std::size_t> trained_jobs_{0};
};

/// Hash of a sorted id list; ties branch checkpoints to their training set.
std::string id_set_hash(const std::vector<std::string>& ids);

}  // namespace ser
