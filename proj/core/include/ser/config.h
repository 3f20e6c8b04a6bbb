#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ser/folds.h"
#include "ser/models.h"
#include "ser/nn/adam.h"

namespace ser {

struct ExperimentPaths {
  std::filesystem::path manifest;
  /// Raw (18-column) or finalized (36-column) feature cache.
  std::filesystem::path features;
  std::filesystem::path embeddings;
  std::filesystem::path output_dir = "runs";
  /// Optional precomputed fold file; overrides criterion/k when set.
  std::filesystem::path folds;
  /// Optional directory of branch checkpoints named
  /// "<audio_only|text_only>-fold<f>-seed<s>.ckpt". Missing ones are trained.
  std::filesystem::path pretrained_dir;
};

struct ExperimentConfig {
  std::string name;
  SystemKind system = SystemKind::kEfCs;
  ModelConfig model;
  /// Unset fields take the per-system defaults of default_lr_schedule.
  std::optional<double> base_lr;
  std::optional<std::size_t> warmup_steps;
  std::size_t epochs = 20;
  /// Epochs for automatically trained PT/WS branches (0: same as epochs).
  std::size_t branch_epochs = 0;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  FoldCriterion criterion = FoldCriterion::sp();
  std::size_t k = 5;
  std::uint64_t fold_seed = 0;
  std::size_t max_text_len = 64;
  std::size_t max_audio_len = 1200;
  /// 0: take the width of the embedding file.
  std::size_t text_dim = 0;
  ExperimentPaths paths;
  /// Execution only; excluded from the config hash.
  std::size_t workers = 1;

  nn::LrSchedule lr_schedule() const;
  std::size_t effective_branch_epochs() const { return branch_epochs ? branch_epochs : epochs; }
  /// Throws ser::Error on an inconsistent configuration.
  void validate() const;
};

/// 0.0007 with 40 warmup steps, except warm-start fine-tuning (0.0001) and
/// late fusion over pretrained branches (0.01, no warmup).
nn::LrSchedule default_lr_schedule(SystemKind kind);

/// Parses a JSON config object; unknown keys are errors. Relative paths are
/// resolved against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Dotted-key override such as "model.size=small" or "seeds=[1,2]". The
/// value is parsed as JSON, falling back to a plain string.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

/// Canonical JSON with every default resolved.
std::string config_to_json(const ExperimentConfig& cfg);
/// Hash of the canonical JSON minus execution-only fields (workers,
/// output_dir).
std::string config_hash(const ExperimentConfig& cfg);
/// <output_dir>/<name or system>-<hash>.
std::filesystem::path run_directory(const ExperimentConfig& cfg);

}  // namespace ser
