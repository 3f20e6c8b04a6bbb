#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace ser {

/// The four target classes. The integer encoding is stable and is the column
/// order of every probability vector in the system.
enum class Emotion : std::uint8_t { kHappy = 0, kSad = 1, kAngry = 2, kNeutral = 3 };

inline constexpr int kNumClasses = 4;

inline constexpr std::array<Emotion, kNumClasses> kAllEmotions = {
    Emotion::kHappy, Emotion::kSad, Emotion::kAngry, Emotion::kNeutral};

constexpr int index_of(Emotion e) { return static_cast<int>(e); }
constexpr Emotion emotion_from_index(int i) { return static_cast<Emotion>(i); }

std::string_view to_string(Emotion e);

/// Maps an annotation string onto a target class. Total: unknown, empty, and
/// non-target labels return nullopt (discard). Excitement is folded into
/// happy. Matching is case-insensitive and ignores surrounding whitespace.
std::optional<Emotion> map_label(std::string_view raw_label);

/// Parses the canonical names produced by to_string.
std::optional<Emotion> parse_emotion(std::string_view name);

}  // namespace ser
