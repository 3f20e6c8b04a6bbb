#include "ser/nn/checkpoint.h"

#include <sstream>

#include "ser/binary_io.h"
#include "ser/error.h"

namespace ser::nn {

namespace {

constexpr std::string_view kMagic = "SERCKPT1";

std::string short_name(const std::string& qualified) {
  const auto slash = qualified.rfind('/');
  return slash == std::string::npos ? qualified : qualified.substr(slash + 1);
}

std::vector<Param*> persistent(Layer& layer) {
  auto out = layer.params();
  for (Param* b : layer.buffers()) out.push_back(b);
  return out;
}

void write_layer(std::ostream& os, const LayerRecord& layer) {
  io::write_string(os, layer.name);
  io::write_string(os, layer.kind);
  io::write_u32(os, static_cast<std::uint32_t>(layer.tensors.size()));
  for (const auto& t : layer.tensors) {
    io::write_string(os, t.name);
    io::write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) io::write_u32(os, d);
    for (float v : t.values) io::write_f32(os, v);
  }
}

std::uint32_t need_u32(std::istream& is) {
  std::uint32_t v;
  if (!io::read_u32(is, v)) throw Error("truncated checkpoint");
  return v;
}

}  // namespace

const LayerRecord* Checkpoint::find(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  io::write_string(os, ckpt.header);
  io::write_u32(os, static_cast<std::uint32_t>(ckpt.layers.size()));
  for (const auto& l : ckpt.layers) write_layer(os, l);
  return os.str();
}

std::string encode_layer(const LayerRecord& record) {
  std::ostringstream os(std::ios::binary);
  write_layer(os, record);
  return os.str();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw Error("not a checkpoint (bad magic)");
  std::istringstream is(std::string(bytes.substr(kMagic.size())), std::ios::binary);
  Checkpoint ckpt;
  ckpt.header = io::read_string(is);
  const auto n_layers = need_u32(is);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerRecord layer;
    layer.name = io::read_string(is);
    layer.kind = io::read_string(is);
    const auto n_tensors = need_u32(is);
    for (std::uint32_t j = 0; j < n_tensors; ++j) {
      TensorRecord t;
      t.name = io::read_string(is);
      const auto rank = need_u32(is);
      std::size_t count = 1;
      for (std::uint32_t r = 0; r < rank; ++r) {
        t.shape.push_back(need_u32(is));
        count *= t.shape.back();
      }
      t.values.resize(count);
      for (auto& v : t.values) v = io::read_f32(is);
      layer.tensors.push_back(std::move(t));
    }
    ckpt.layers.push_back(std::move(layer));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_text_file(path)); }

LayerRecord to_record(Layer& layer) {
  LayerRecord rec;
  rec.name = layer.name();
  rec.kind = std::string(layer.kind());
  for (Param* p : persistent(layer)) {
    TensorRecord t;
    t.name = short_name(p->name);
    for (auto d : p->shape) t.shape.push_back(static_cast<std::uint32_t>(d));
    t.values.reserve(p->size());
    for (double v : p->value) t.values.push_back(static_cast<float>(v));
    rec.tensors.push_back(std::move(t));
  }
  return rec;
}

void load_record(Layer& layer, const LayerRecord& record) {
  if (record.kind != layer.kind()) {
    throw Error("checkpoint layer '" + record.name + "' is a " + record.kind + ", expected " +
                std::string(layer.kind()));
  }
  auto targets = persistent(layer);
  if (targets.size() != record.tensors.size()) {
    throw Error("checkpoint layer '" + record.name + "' has the wrong number of tensors");
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Param& p = *targets[i];
    const TensorRecord& t = record.tensors[i];
    if (t.name != short_name(p.name)) throw Error("checkpoint tensor '" + t.name + "' does not match " + p.name);
    bool same_shape = t.shape.size() == p.shape.size();
    for (std::size_t d = 0; same_shape && d < t.shape.size(); ++d) same_shape = t.shape[d] == p.shape[d];
    if (!same_shape || t.values.size() != p.size()) throw Error("checkpoint tensor shape mismatch for " + p.name);
    for (std::size_t j = 0; j < p.size(); ++j) p.value[j] = t.values[j];
  }
}

void round_to_float(Layer& layer) {
  for (Param* p : persistent(layer)) {
    for (double& v : p->value) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace ser::nn
