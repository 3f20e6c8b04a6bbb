#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ser/manifest.h"
#include "ser/wav.h"

namespace ser {

/// Parameters of the synthetic bimodal corpus. Speakers come in pairs per
/// session; scripts recur across sessions with fixed lines, which is what
/// makes script leakage observable.
struct SynthSpec {
  std::size_t n_utts = 2000;
  std::size_t n_speakers = 10;
  std::size_t n_scripts = 3;
  std::size_t lines_per_script = 48;
  double audio_informativeness = 0.7;
  double text_informativeness = 0.7;
  double negation_rate = 0.0;
  std::uint64_t seed = 0;
  /// Downstream fold count the corpus must support (sessions >= folds).
  std::size_t folds = 5;
  double min_duration = 0.5;  // seconds
  double max_duration = 0.8;
  int sample_rate = 16000;
};

struct SynthDataset {
  Manifest manifest;
  /// Aligned with manifest.records.
  std::vector<Waveform> waveforms;
  std::vector<std::vector<std::string>> tokens;
  /// Class whose acoustic profile each waveform was rendered with.
  std::vector<Emotion> acoustic_class;
  /// Class each token list expresses once negation is resolved.
  std::vector<Emotion> lexical_class;
};

/// Deterministic in the spec (including seed). Throws ser::Error on an
/// infeasible spec.
SynthDataset synth_dataset(const SynthSpec& spec);

struct CorpusFiles {
  std::filesystem::path manifest;     // manifest.jsonl
  std::filesystem::path features;     // features.lld (raw descriptors)
  std::filesystem::path static_embeddings;      // embeddings_static.bin
  std::filesystem::path contextual_embeddings;  // embeddings_contextual.bin
  std::filesystem::path tokens;       // tokens.jsonl
};

struct CorpusOptions {
  std::size_t embedding_dim = 32;
  std::uint64_t embedding_seed = 0;
  /// Also write wav/<id>.wav for every utterance.
  bool write_audio = true;
};

/// Writes the manifest, token lists, both embedding variants, and the raw
/// acoustic descriptor cache of a synthetic corpus under `dir`.
CorpusFiles write_corpus(const SynthDataset& data, const std::filesystem::path& dir, const CorpusOptions& options);

/// Class vocabulary used by the generator.
const std::vector<std::string>& class_keywords(Emotion e);
inline constexpr const char* kNegationToken = "not";
/// Class a negated keyword of class e expresses (happy<->sad, angry<->neutral).
Emotion negate(Emotion e);

}  // namespace ser
