#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ser/nn/layers.h"

namespace ser::nn {

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
};

struct LayerRecord {
  std::string name;
  std::string kind;
  std::vector<TensorRecord> tensors;
};

/// Ordered per-layer parameter records plus a free-form header (JSON by
/// convention). Values are stored as little-endian 32-bit floats.
///
/// Layout: "SERCKPT1", header string, u32 layer count, then per layer:
/// name, kind, u32 tensor count, and per tensor: name, u32 rank, rank x u32
/// dims, values. Strings are u32-length-prefixed.
struct Checkpoint {
  std::string header;
  std::vector<LayerRecord> layers;

  const LayerRecord* find(std::string_view name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters then buffers, each rounded to float.
LayerRecord to_record(Layer& layer);
/// Throws ser::Error on a kind, tensor name, or shape mismatch.
void load_record(Layer& layer, const LayerRecord& record);
/// Serialized bytes of one layer record; used for bit-level freeze checks.
std::string encode_layer(const LayerRecord& record);

/// Rounds every parameter and buffer to the nearest float, so the in-memory
/// model equals what a checkpoint round-trip would produce.
void round_to_float(Layer& layer);

}  // namespace ser::nn
