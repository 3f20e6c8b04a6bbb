#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ser/config.h"
#include "ser/dsp.h"
#include "ser/embeddings.h"
#include "ser/folds.h"
#include "ser/manifest.h"
#include "ser/nn/batch.h"

namespace ser {

/// Everything an experiment reads from disk. Audio features are kept raw
/// (18 columns, normalized per fold from training statistics) or finalized
/// (36 columns, used as is), depending on the cache given.
struct Dataset {
  Manifest manifest;
  std::map<std::string, dsp::LldMatrix> raw_audio;
  std::map<std::string, dsp::FeatureSequence> final_audio;
  std::optional<EmbeddingStore> embeddings;

  bool has_audio() const { return !raw_audio.empty() || !final_audio.empty(); }
  bool raw_features() const { return !raw_audio.empty(); }
  std::size_t text_dim() const { return embeddings ? embeddings->declared_dim() : 0; }
};

/// Loads the manifest and the modalities `system` needs; PT/WS systems need
/// both. Throws ser::Error when a manifest id has no features or embedding.
Dataset load_dataset(const ExperimentConfig& cfg, SystemKind system);

/// One utterance ready for batching: truncated, normalized sequences.
struct Example {
  std::string id;
  int label = 0;
  std::size_t audio_steps = 0;
  std::vector<double> audio;  // audio_steps x 36
  std::size_t text_steps = 0;
  std::vector<double> text;   // text_steps x text_dim
};

struct TruncationCount {
  std::size_t text = 0;
  std::size_t audio = 0;
};

struct FoldData {
  std::vector<Example> train;
  std::vector<Example> test;
  std::optional<dsp::NormStats> norm;
  std::size_t text_dim = 0;
  TruncationCount truncated;
};

struct ExampleOptions {
  bool audio = true;
  bool text = true;
  std::size_t max_audio_len = 1200;
  std::size_t max_text_len = 64;
};

/// Fits normalization on the fold's training ids (raw caches) and builds
/// both example lists in id order.
FoldData build_fold_data(const Dataset& data, const Fold& fold, const ExampleOptions& options);

/// Examples for arbitrary ids with given normalization statistics (required
/// for raw caches).
std::vector<Example> build_examples(const Dataset& data, const std::vector<std::string>& ids,
                                    const std::optional<dsp::NormStats>& norm, const ExampleOptions& options,
                                    TruncationCount* truncated = nullptr);

struct Batch {
  std::optional<nn::MaskedBatch> audio;
  std::optional<nn::MaskedBatch> text;
};

/// Zero-pads the selected examples to the longest sequence per modality.
Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices, bool audio, bool text,
                 std::size_t text_dim);

std::string norm_stats_to_json(const dsp::NormStats& stats);
dsp::NormStats norm_stats_from_json(std::string_view json);

}  // namespace ser
