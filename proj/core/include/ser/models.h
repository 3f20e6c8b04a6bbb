#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ser/manifest.h"
#include "ser/nn/adam.h"
#include "ser/nn/batch.h"
#include "ser/nn/checkpoint.h"
#include "ser/nn/grad_check.h"
#include "ser/nn/layers.h"

namespace ser {

enum class SizeVariant { kSmall, kBase, kLarge };

struct TextBranchConfig {
  std::size_t reduce_dim = 128;    // L_T1 output width
  std::size_t conv_filters = 128;  // L_T2, L_T3
  std::size_t kernel = 3;
};

struct AudioBranchConfig {
  std::size_t conv_filters = 104;  // L_A1, L_A2
  std::size_t kernel = 9;
};

struct ModelConfig {
  SizeVariant size = SizeVariant::kBase;
  TextBranchConfig text;
  AudioBranchConfig audio;
  std::size_t ef_hidden = 128;
  double dropout_rate = 0.5;  // at the input of L_A2
  /// Late fusion through one scalar weight per modality instead of a dense
  /// layer over the concatenated logits.
  bool lf_scalar_mix = false;

  /// Base widths halved (small) or doubled (large); kernels unchanged.
  static ModelConfig for_variant(SizeVariant variant);
  void validate() const;
};

std::string_view to_string(SizeVariant v);
SizeVariant parse_size_variant(std::string_view name);
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view json);

enum class SystemKind { kAudioOnly, kTextOnly, kEfCs, kEfPt, kEfWs, kLfCs, kLfPt, kLfWs };
enum class Strategy { kNone, kColdStart, kPretrained, kWarmStart };

std::string_view to_string(SystemKind k);
SystemKind parse_system_kind(std::string_view name);
bool uses_audio(SystemKind k);
bool uses_text(SystemKind k);
bool is_fusion(SystemKind k);
bool is_early_fusion(SystemKind k);
Strategy strategy_of(SystemKind k);
/// PT and WS systems start from separately trained branches.
bool needs_pretrained_branches(SystemKind k);

inline constexpr std::size_t kAudioInputDim = 36;

/// Branch checkpoints used to initialize PT/WS fusion models.
struct PretrainedBranches {
  const nn::Checkpoint* audio = nullptr;
  const nn::Checkpoint* text = nullptr;
};

/// Text branch (L_T1..L_T5), audio branch (L_A1..L_A4) and, for fusion
/// systems, the post-merge head (F_H hidden + F_O output for early fusion;
/// F_O for late fusion). Layers are grouped by these names; freezing acts
/// on groups.
class ModelGraph {
 public:
  struct Output {
    nn::SeqBatch logits;  // B x 1 x 4
    nn::SeqBatch probs;
  };

  ModelGraph(SystemKind kind, const ModelConfig& cfg, std::size_t text_dim, std::uint64_t seed);
  ~ModelGraph();
  ModelGraph(ModelGraph&&) noexcept;
  ModelGraph& operator=(ModelGraph&&) noexcept;

  SystemKind kind() const { return kind_; }
  const ModelConfig& config() const { return cfg_; }
  std::size_t text_dim() const { return text_dim_; }

  /// Pass nullptr for a modality the system does not use. Throws on a
  /// missing modality or when the two batches are not aligned by id.
  Output forward(const nn::MaskedBatch* audio, const nn::MaskedBatch* text, nn::Mode mode);
  /// Back-propagates from the logits of the last forward pass. Stops below
  /// the lowest trainable layer.
  void backward(const nn::SeqBatch& grad_logits);

  /// Every trainable tensor in a fixed order (frozen ones included; the
  /// optimizer skips them).
  std::vector<nn::Param*> parameters();
  /// Layers that own parameters or buffers, in checkpoint order.
  std::vector<nn::Layer*> persistent_layers();
  nn::Layer& layer(std::string_view name);
  bool has_layer(std::string_view name) const;

  /// L_T1..L_T5, L_A1..L_A4, F_H, F_O as present.
  std::vector<std::string> groups() const;
  void set_group_frozen(std::string_view group, bool frozen);
  bool group_frozen(std::string_view group) const;
  /// Groups that own parameters and are not frozen.
  std::vector<std::string> trainable_groups() const;

  std::size_t text_pooled_width() const;
  std::size_t audio_pooled_width() const;
  /// Width entering the fusion head (0 for single-modality systems).
  std::size_t fusion_input_width() const;

  /// Pooled branch embeddings from the last forward pass.
  const nn::SeqBatch& last_text_embedding() const;
  const nn::SeqBatch& last_audio_embedding() const;

  void set_dropout_enabled(bool enabled);
  void reseed_dropout(std::uint64_t seed);
  void round_to_float();

  /// Header is a JSON object with the system, model config, and text width;
  /// `meta_json` (a JSON object) is stored under "meta".
  nn::Checkpoint to_checkpoint(std::string_view meta_json = "{}");
  /// Copies the records of every layer whose name starts with `prefix`.
  void load_layers(const nn::Checkpoint& ckpt, std::string_view prefix);

 private:
  struct Impl;
  SystemKind kind_;
  ModelConfig cfg_;
  std::size_t text_dim_;
  std::unique_ptr<Impl> impl_;
};

/// Fresh layers are Xavier-initialized; PT/WS systems copy their branches
/// from `pretrained` (required for those kinds).
ModelGraph build_model(SystemKind kind, const ModelConfig& cfg, std::size_t text_dim, std::uint64_t seed,
                       const PretrainedBranches& pretrained = {});

/// Rebuilds a model from a checkpoint written by ModelGraph::to_checkpoint.
ModelGraph load_model(const nn::Checkpoint& ckpt);
/// The "meta" object of a checkpoint header, as JSON text.
std::string checkpoint_meta(const nn::Checkpoint& ckpt);
SystemKind checkpoint_system(const nn::Checkpoint& ckpt);

/// Sets freeze flags: CS freezes nothing; PT freezes both branches; WS
/// freezes L_T1, L_T2, L_A1 and the branch heads, leaving L_T3, L_A2 and the
/// fusion head trainable. Returns false (and logs a warning) when a fusion
/// strategy is applied to a single-modality model.
bool apply_training_strategy(ModelGraph& model, SystemKind kind);

/// One forward/backward/Adam update in train mode. Labels come from
/// whichever batch is present. Throws ser::Error on a non-finite loss or
/// gradient.
double train_step(ModelGraph& model, const nn::MaskedBatch* audio, const nn::MaskedBatch* text,
                  const ClassWeights& weights, nn::AdamState& adam);

/// Finite-difference check of every trainable tensor with dropout disabled
/// and batchnorm on batch statistics.
nn::GradCheckResult grad_check_model(ModelGraph& model, const nn::MaskedBatch* audio, const nn::MaskedBatch* text,
                                     const ClassWeights& weights, const nn::GradCheckOptions& options);

}  // namespace ser
