#include "ser/manifest.h"

#include <json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ser/binary_io.h"
#include "ser/error.h"

namespace ser {

namespace {

constexpr std::array<const char*, 7> kFields = {"id",        "speaker_id", "session_id", "script_id",
                                                "raw_label", "audio_ref",  "text_ref"};

std::string required_string(const nlohmann::json& obj, const char* field, std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw Error("manifest line " + std::to_string(line_no) + ": missing field '" + field + "'");
  }
  if (!it->is_string()) {
    throw Error("manifest line " + std::to_string(line_no) + ": field '" + field + "' is not a string");
  }
  return it->get<std::string>();
}

}  // namespace

const UtteranceRecord* Manifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

Manifest parse_manifest(std::string_view text, std::string name) {
  Manifest manifest;
  manifest.name = std::move(name);
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw Error("manifest line " + std::to_string(line_no) + ": not an object");

    UtteranceRecord rec;
    rec.id = required_string(obj, "id", line_no);
    rec.speaker_id = required_string(obj, "speaker_id", line_no);
    rec.session_id = required_string(obj, "session_id", line_no);
    rec.script_id = required_string(obj, "script_id", line_no);
    rec.raw_label = required_string(obj, "raw_label", line_no);
    rec.audio_ref = required_string(obj, "audio_ref", line_no);
    rec.text_ref = required_string(obj, "text_ref", line_no);
    if (!seen.insert(rec.id).second) throw Error("duplicate utterance id '" + rec.id + "'");

    auto label = map_label(rec.raw_label);
    if (!label) {
      ++manifest.discarded;
      continue;
    }
    rec.label = *label;
    manifest.records.push_back(std::move(rec));
  }
  if (manifest.records.empty()) throw Error("manifest '" + manifest.name + "' has no usable records");
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(io::read_text_file(path), path.stem().string());
}

std::string serialize_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    // ordered_json keeps the canonical field order.
    nlohmann::ordered_json obj;
    obj[kFields[0]] = r.id;
    obj[kFields[1]] = r.speaker_id;
    obj[kFields[2]] = r.session_id;
    obj[kFields[3]] = r.script_id;
    obj[kFields[4]] = r.raw_label;
    obj[kFields[5]] = r.audio_ref;
    obj[kFields[6]] = r.text_ref;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_manifest(manifest));
}

ClassCounts class_counts(const Manifest& manifest) {
  ClassCounts counts{};
  for (const auto& r : manifest.records) ++counts[index_of(r.label)];
  return counts;
}

ClassWeights class_weights(const ClassCounts& counts) {
  std::size_t total = 0;
  for (auto n : counts) total += n;
  ClassWeights w{};
  for (int k = 0; k < kNumClasses; ++k) {
    if (counts[k] == 0) {
      throw Error("class '" + std::string(to_string(emotion_from_index(k))) + "' has no examples");
    }
    w[k] = static_cast<double>(total) / (static_cast<double>(kNumClasses) * static_cast<double>(counts[k]));
  }
  return w;
}

ClassWeights class_weights(const Manifest& manifest) { return class_weights(class_counts(manifest)); }

Manifest subset(const Manifest& manifest, const std::vector<std::string>& ids, std::string name) {
  std::unordered_map<std::string_view, const UtteranceRecord*> index;
  index.reserve(manifest.records.size());
  for (const auto& r : manifest.records) index.emplace(r.id, &r);
  Manifest out;
  out.name = std::move(name);
  out.records.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw Error("unknown utterance id '" + id + "'");
    out.records.push_back(*it->second);
  }
  return out;
}

}  // namespace ser
