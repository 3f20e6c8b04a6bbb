#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ser/labels.h"

namespace ser {

/// Script id shared by every improvised utterance; fold construction treats
/// it as a single group.
inline constexpr std::string_view kImprovScript = "improv";

struct UtteranceRecord {
  std::string id;
  std::string speaker_id;
  std::string session_id;
  std::string script_id;
  std::string raw_label;
  Emotion label = Emotion::kNeutral;
  std::string audio_ref;
  std::string text_ref;

  bool is_improv() const { return script_id == kImprovScript; }
};

struct Manifest {
  std::string name;
  std::vector<UtteranceRecord> records;
  /// Records dropped at load time because their raw label is not a target.
  std::size_t discarded = 0;

  const UtteranceRecord* find(std::string_view id) const;
};

using ClassCounts = std::array<std::size_t, kNumClasses>;
using ClassWeights = std::array<double, kNumClasses>;

/// Parses a manifest of one JSON object per line. Required fields: id,
/// speaker_id, session_id, script_id, raw_label, audio_ref, text_ref; unknown
/// fields are ignored. Throws ser::Error on a missing field, a duplicate id,
/// or when no record survives label mapping.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view text, std::string name);

/// Canonical serialization: one line per surviving record, fixed field order.
std::string serialize_manifest(const Manifest& manifest);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

ClassCounts class_counts(const Manifest& manifest);

/// weight_k = N / (K * n_k). Under the empirical class distribution the mean
/// weight is exactly one. Throws ser::Error if any class is absent.
ClassWeights class_weights(const ClassCounts& counts);
ClassWeights class_weights(const Manifest& manifest);

/// Records whose ids are listed, in the order given. Throws on unknown ids.
Manifest subset(const Manifest& manifest, const std::vector<std::string>& ids, std::string name);

}  // namespace ser
