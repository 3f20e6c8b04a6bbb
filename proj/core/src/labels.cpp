#include "ser/labels.h"

#include <algorithm>
#include <cctype>
#include <string>

namespace ser {

std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::kHappy: return "happy";
    case Emotion::kSad: return "sad";
    case Emotion::kAngry: return "angry";
    case Emotion::kNeutral: return "neutral";
  }
  return "unknown";
}

std::optional<Emotion> map_label(std::string_view raw_label) {
  std::size_t begin = 0;
  std::size_t end = raw_label.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw_label[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw_label[end - 1]))) --end;
  std::string key(raw_label.substr(begin, end - begin));
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  if (key == "happy" || key == "happiness" || key == "hap" || key == "excitement" ||
      key == "excited" || key == "exc") {
    return Emotion::kHappy;
  }
  if (key == "sad" || key == "sadness") return Emotion::kSad;
  if (key == "angry" || key == "anger" || key == "ang") return Emotion::kAngry;
  if (key == "neutral" || key == "neu") return Emotion::kNeutral;
  return std::nullopt;
}

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (Emotion e : kAllEmotions) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

}  // namespace ser
