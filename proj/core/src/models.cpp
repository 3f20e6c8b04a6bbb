#include "ser/models.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <json.hpp>
#include <map>

#include "ser/error.h"
#include "ser/nn/loss.h"
#include "ser/random.h"

namespace ser {

using nn::Layer;
using nn::Mode;
using nn::SeqBatch;

// ---------------------------------------------------------------- config

ModelConfig ModelConfig::for_variant(SizeVariant variant) {
  ModelConfig cfg;
  cfg.size = variant;
  auto scale = [variant](std::size_t w) {
    switch (variant) {
      case SizeVariant::kSmall: return w / 2;
      case SizeVariant::kLarge: return w * 2;
      case SizeVariant::kBase: break;
    }
    return w;
  };
  cfg.text.reduce_dim = scale(cfg.text.reduce_dim);
  cfg.text.conv_filters = scale(cfg.text.conv_filters);
  cfg.audio.conv_filters = scale(cfg.audio.conv_filters);
  cfg.ef_hidden = scale(cfg.ef_hidden);
  return cfg;
}

void ModelConfig::validate() const {
  if (text.reduce_dim == 0 || text.conv_filters == 0 || audio.conv_filters == 0 || ef_hidden == 0) {
    throw Error("model widths must be positive");
  }
  if (text.kernel % 2 == 0 || audio.kernel % 2 == 0) throw Error("convolution kernels must be odd");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw Error("dropout rate must lie in [0, 1)");
}

std::string_view to_string(SizeVariant v) {
  switch (v) {
    case SizeVariant::kSmall: return "small";
    case SizeVariant::kBase: return "base";
    case SizeVariant::kLarge: return "large";
  }
  return "base";
}

SizeVariant parse_size_variant(std::string_view name) {
  if (name == "small") return SizeVariant::kSmall;
  if (name == "base") return SizeVariant::kBase;
  if (name == "large") return SizeVariant::kLarge;
  throw Error("unknown size variant '" + std::string(name) + "'");
}

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["size"] = std::string(to_string(cfg.size));
  j["text"] = {{"reduce_dim", cfg.text.reduce_dim}, {"conv_filters", cfg.text.conv_filters}, {"kernel", cfg.text.kernel}};
  j["audio"] = {{"conv_filters", cfg.audio.conv_filters}, {"kernel", cfg.audio.kernel}};
  j["ef_hidden"] = cfg.ef_hidden;
  j["dropout_rate"] = cfg.dropout_rate;
  j["lf_scalar_mix"] = cfg.lf_scalar_mix;
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) try {
  const auto j = nlohmann::json::parse(text);
  ModelConfig cfg = ModelConfig::for_variant(parse_size_variant(j.value("size", std::string("base"))));
  if (j.contains("text")) {
    const auto& t = j["text"];
    cfg.text.reduce_dim = t.value("reduce_dim", cfg.text.reduce_dim);
    cfg.text.conv_filters = t.value("conv_filters", cfg.text.conv_filters);
    cfg.text.kernel = t.value("kernel", cfg.text.kernel);
  }
  if (j.contains("audio")) {
    const auto& a = j["audio"];
    cfg.audio.conv_filters = a.value("conv_filters", cfg.audio.conv_filters);
    cfg.audio.kernel = a.value("kernel", cfg.audio.kernel);
  }
  cfg.ef_hidden = j.value("ef_hidden", cfg.ef_hidden);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.lf_scalar_mix = j.value("lf_scalar_mix", cfg.lf_scalar_mix);
  cfg.validate();
  return cfg;
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed model config: ") + e.what());
}

// ---------------------------------------------------------------- system kinds

std::string_view to_string(SystemKind k) {
  switch (k) {
    case SystemKind::kAudioOnly: return "audio_only";
    case SystemKind::kTextOnly: return "text_only";
    case SystemKind::kEfCs: return "ef_cs";
    case SystemKind::kEfPt: return "ef_pt";
    case SystemKind::kEfWs: return "ef_ws";
    case SystemKind::kLfCs: return "lf_cs";
    case SystemKind::kLfPt: return "lf_pt";
    case SystemKind::kLfWs: return "lf_ws";
  }
  return "unknown";
}

SystemKind parse_system_kind(std::string_view name) {
  for (auto k : {SystemKind::kAudioOnly, SystemKind::kTextOnly, SystemKind::kEfCs, SystemKind::kEfPt,
                 SystemKind::kEfWs, SystemKind::kLfCs, SystemKind::kLfPt, SystemKind::kLfWs}) {
    if (to_string(k) == name) return k;
  }
  throw Error("unknown system '" + std::string(name) + "'");
}

bool uses_audio(SystemKind k) { return k != SystemKind::kTextOnly; }
bool uses_text(SystemKind k) { return k != SystemKind::kAudioOnly; }
bool is_fusion(SystemKind k) { return k != SystemKind::kAudioOnly && k != SystemKind::kTextOnly; }
bool is_early_fusion(SystemKind k) {
  return k == SystemKind::kEfCs || k == SystemKind::kEfPt || k == SystemKind::kEfWs;
}

Strategy strategy_of(SystemKind k) {
  switch (k) {
    case SystemKind::kEfCs:
    case SystemKind::kLfCs: return Strategy::kColdStart;
    case SystemKind::kEfPt:
    case SystemKind::kLfPt: return Strategy::kPretrained;
    case SystemKind::kEfWs:
    case SystemKind::kLfWs: return Strategy::kWarmStart;
    default: return Strategy::kNone;
  }
}

bool needs_pretrained_branches(SystemKind k) {
  const auto s = strategy_of(k);
  return s == Strategy::kPretrained || s == Strategy::kWarmStart;
}

// ---------------------------------------------------------------- graph

namespace {

// Encoder layers up to and including pooling, run in sequence.
struct Chain {
  std::vector<std::unique_ptr<Layer>> layers;

  SeqBatch forward(const SeqBatch& x, Mode mode) {
    SeqBatch h = x;
    for (auto& l : layers) h = l->forward(h, mode);
    return h;
  }

  void backward(const SeqBatch& grad) {
    std::ptrdiff_t lowest = -1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i]->frozen() && !layers[i]->params().empty()) {
        lowest = static_cast<std::ptrdiff_t>(i);
        break;
      }
    }
    if (lowest < 0) return;
    SeqBatch g = grad;
    for (auto i = static_cast<std::ptrdiff_t>(layers.size()) - 1; i >= lowest; --i) {
      auto& layer = *layers[static_cast<std::size_t>(i)];
      layer.set_input_grad_needed(i != lowest);
      g = layer.backward(g);
    }
  }

  bool any_trainable() const {
    return std::any_of(layers.begin(), layers.end(),
                       [](const auto& l) { return !l->frozen() && !l->params().empty(); });
  }
};

std::string group_of(const std::string& layer_name) {
  const auto dot = layer_name.find('.');
  return dot == std::string::npos ? layer_name : layer_name.substr(0, dot);
}

void concat_rows(const SeqBatch& a, const SeqBatch& b, SeqBatch& out) {
  out = SeqBatch(a.batch, 1, a.dim + b.dim);
  for (std::size_t i = 0; i < a.batch; ++i) {
    std::copy_n(a.row(i, 0), a.dim, out.row(i, 0));
    std::copy_n(b.row(i, 0), b.dim, out.row(i, 0) + a.dim);
  }
}

void split_rows(const SeqBatch& g, std::size_t left, SeqBatch& a, SeqBatch& b) {
  a = SeqBatch(g.batch, 1, left);
  b = SeqBatch(g.batch, 1, g.dim - left);
  for (std::size_t i = 0; i < g.batch; ++i) {
    std::copy_n(g.row(i, 0), left, a.row(i, 0));
    std::copy_n(g.row(i, 0) + left, g.dim - left, b.row(i, 0));
  }
}

void warn(const std::string& msg) { std::clog << "[ser] warning: " << msg << '\n'; }

}  // namespace

struct ModelGraph::Impl {
  std::optional<Chain> text_enc, audio_enc;
  std::unique_ptr<nn::Dense> text_head, audio_head;
  Chain fusion;  // EF: F_H, F_H.bn, F_H.relu, F_O; LF: F_O
  nn::Dropout* dropout = nullptr;
  std::map<std::string, std::vector<Layer*>, std::less<>> groups;
  std::vector<std::string> group_order;

  SeqBatch text_pooled, audio_pooled, text_logits, audio_logits;
  bool have_forward = false;

  void add(Layer* layer) {
    const auto g = group_of(layer->name());
    if (!groups.count(g)) group_order.push_back(g);
    groups[g].push_back(layer);
  }
};

ModelGraph::ModelGraph(SystemKind kind, const ModelConfig& cfg, std::size_t text_dim, std::uint64_t seed)
    : kind_(kind), cfg_(cfg), text_dim_(text_dim), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  if (uses_text(kind_) && text_dim_ == 0) throw Error("text systems need a positive embedding width");
  auto& im = *impl_;

  if (uses_text(kind_)) {
    Rng rng(derive_seed(seed, "text-branch"));
    const auto& t = cfg_.text;
    Chain c;
    auto l1 = std::make_unique<nn::Dense>("L_T1", text_dim_, t.reduce_dim, false);
    auto l2 = std::make_unique<nn::Conv1d>("L_T2", t.reduce_dim, t.conv_filters, t.kernel, false);
    auto l3 = std::make_unique<nn::Conv1d>("L_T3", t.conv_filters, t.conv_filters, t.kernel, false);
    l1->init_xavier(rng);
    l2->init_xavier(rng);
    l3->init_xavier(rng);
    c.layers.push_back(std::move(l1));
    c.layers.push_back(std::make_unique<nn::BatchNorm>("L_T1.bn", t.reduce_dim));
    c.layers.push_back(std::make_unique<nn::Relu>("L_T1.relu"));
    c.layers.push_back(std::move(l2));
    c.layers.push_back(std::make_unique<nn::BatchNorm>("L_T2.bn", t.conv_filters));
    c.layers.push_back(std::make_unique<nn::Relu>("L_T2.relu"));
    c.layers.push_back(std::move(l3));
    c.layers.push_back(std::make_unique<nn::BatchNorm>("L_T3.bn", t.conv_filters));
    c.layers.push_back(std::make_unique<nn::Relu>("L_T3.relu"));
    c.layers.push_back(std::make_unique<nn::MaskedMeanPool>("L_T4"));
    for (auto& l : c.layers) im.add(l.get());
    if (!is_early_fusion(kind_)) {
      im.text_head = std::make_unique<nn::Dense>("L_T5", t.conv_filters, kNumClasses, true);
      im.text_head->init_xavier(rng);
      im.add(im.text_head.get());
    }
    im.text_enc = std::move(c);
  }

  if (uses_audio(kind_)) {
    Rng rng(derive_seed(seed, "audio-branch"));
    const auto& a = cfg_.audio;
    Chain c;
    auto l1 = std::make_unique<nn::Conv1d>("L_A1", kAudioInputDim, a.conv_filters, a.kernel, false);
    auto l2 = std::make_unique<nn::Conv1d>("L_A2", a.conv_filters, a.conv_filters, a.kernel, false);
    l1->init_xavier(rng);
    l2->init_xavier(rng);
    auto drop = std::make_unique<nn::Dropout>("L_A2.dropout", cfg_.dropout_rate, derive_seed(seed, "dropout"));
    im.dropout = drop.get();
    c.layers.push_back(std::move(l1));
    c.layers.push_back(std::make_unique<nn::BatchNorm>("L_A1.bn", a.conv_filters));
    c.layers.push_back(std::make_unique<nn::Relu>("L_A1.relu"));
    c.layers.push_back(std::move(drop));
    c.layers.push_back(std::move(l2));
    c.layers.push_back(std::make_unique<nn::BatchNorm>("L_A2.bn", a.conv_filters));
    c.layers.push_back(std::make_unique<nn::Relu>("L_A2.relu"));
    c.layers.push_back(std::make_unique<nn::MaskedMeanPool>("L_A3"));
    for (auto& l : c.layers) im.add(l.get());
    if (!is_early_fusion(kind_)) {
      im.audio_head = std::make_unique<nn::Dense>("L_A4", a.conv_filters, kNumClasses, true);
      im.audio_head->init_xavier(rng);
      im.add(im.audio_head.get());
    }
    im.audio_enc = std::move(c);
  }

  if (is_fusion(kind_)) {
    Rng rng(derive_seed(seed, "fusion-head"));
    if (is_early_fusion(kind_)) {
      const std::size_t width = cfg_.text.conv_filters + cfg_.audio.conv_filters;
      auto hidden = std::make_unique<nn::Dense>("F_H", width, cfg_.ef_hidden, false);
      auto out = std::make_unique<nn::Dense>("F_O", cfg_.ef_hidden, kNumClasses, true);
      hidden->init_xavier(rng);
      out->init_xavier(rng);
      im.fusion.layers.push_back(std::move(hidden));
      im.fusion.layers.push_back(std::make_unique<nn::BatchNorm>("F_H.bn", cfg_.ef_hidden));
      im.fusion.layers.push_back(std::make_unique<nn::Relu>("F_H.relu"));
      im.fusion.layers.push_back(std::move(out));
    } else if (cfg_.lf_scalar_mix) {
      im.fusion.layers.push_back(std::make_unique<nn::ScalarMix>("F_O", kNumClasses));
    } else {
      auto out = std::make_unique<nn::Dense>("F_O", 2 * kNumClasses, kNumClasses, true);
      out->init_xavier(rng);
      im.fusion.layers.push_back(std::move(out));
    }
    for (auto& l : im.fusion.layers) im.add(l.get());
  }

  // Width bookkeeping.
  if (is_early_fusion(kind_) && fusion_input_width() != text_pooled_width() + audio_pooled_width()) {
    throw Error("early fusion width mismatch");
  }
  if (is_fusion(kind_) && !is_early_fusion(kind_) && fusion_input_width() != 2 * kNumClasses) {
    throw Error("late fusion width mismatch");
  }
}

ModelGraph::~ModelGraph() = default;
ModelGraph::ModelGraph(ModelGraph&&) noexcept = default;
ModelGraph& ModelGraph::operator=(ModelGraph&&) noexcept = default;

std::size_t ModelGraph::text_pooled_width() const { return uses_text(kind_) ? cfg_.text.conv_filters : 0; }
std::size_t ModelGraph::audio_pooled_width() const { return uses_audio(kind_) ? cfg_.audio.conv_filters : 0; }

std::size_t ModelGraph::fusion_input_width() const {
  if (!is_fusion(kind_)) return 0;
  if (is_early_fusion(kind_)) {
    return static_cast<nn::Dense&>(*impl_->fusion.layers.front()).in_dim();
  }
  return 2 * kNumClasses;
}

ModelGraph::Output ModelGraph::forward(const nn::MaskedBatch* audio, const nn::MaskedBatch* text, Mode mode) {
  auto& im = *impl_;
  if (uses_audio(kind_) && audio == nullptr) throw Error("system " + std::string(to_string(kind_)) + " needs audio input");
  if (uses_text(kind_) && text == nullptr) throw Error("system " + std::string(to_string(kind_)) + " needs text input");
  if (audio && text && uses_audio(kind_) && uses_text(kind_)) {
    if (audio->data.batch != text->data.batch) throw Error("audio and text batches differ in size");
    if (!audio->ids.empty() && !text->ids.empty() && audio->ids != text->ids) {
      throw Error("audio and text batches are not aligned by utterance id");
    }
  }

  SeqBatch logits;
  if (uses_text(kind_)) {
    text->data.validate();
    im.text_pooled = im.text_enc->forward(text->data, mode);
  }
  if (uses_audio(kind_)) {
    audio->data.validate();
    im.audio_pooled = im.audio_enc->forward(audio->data, mode);
  }
  switch (kind_) {
    case SystemKind::kTextOnly: logits = im.text_head->forward(im.text_pooled, mode); break;
    case SystemKind::kAudioOnly: logits = im.audio_head->forward(im.audio_pooled, mode); break;
    default: {
      SeqBatch merged;
      if (is_early_fusion(kind_)) {
        concat_rows(im.text_pooled, im.audio_pooled, merged);
      } else {
        im.text_logits = im.text_head->forward(im.text_pooled, mode);
        im.audio_logits = im.audio_head->forward(im.audio_pooled, mode);
        concat_rows(im.text_logits, im.audio_logits, merged);
      }
      logits = im.fusion.forward(merged, mode);
    }
  }
  im.have_forward = true;
  Output out;
  out.probs = nn::softmax(logits);
  out.logits = std::move(logits);
  return out;
}

void ModelGraph::backward(const SeqBatch& grad_logits) {
  auto& im = *impl_;
  if (!im.have_forward) throw Error("backward called before forward");
  auto branch_backward = [](Chain& enc, nn::Dense* head, const SeqBatch* grad_logits_in, const SeqBatch* grad_pooled_in) {
    SeqBatch grad_pooled;
    if (grad_logits_in) {
      const bool below = enc.any_trainable();
      if (head->frozen() && !below) return;
      grad_pooled = head->backward(*grad_logits_in);
      if (!below) return;
    } else {
      grad_pooled = *grad_pooled_in;
    }
    enc.backward(grad_pooled);
  };

  switch (kind_) {
    case SystemKind::kTextOnly: branch_backward(*im.text_enc, im.text_head.get(), &grad_logits, nullptr); return;
    case SystemKind::kAudioOnly: branch_backward(*im.audio_enc, im.audio_head.get(), &grad_logits, nullptr); return;
    default: break;
  }

  const bool branches_trainable = im.text_enc->any_trainable() || im.audio_enc->any_trainable() ||
                                  (!is_early_fusion(kind_) && (!im.text_head->frozen() || !im.audio_head->frozen()));
  // The fusion head's own parameters always need their gradient; the merged
  // input gradient only when something below is trainable.
  SeqBatch g = grad_logits;
  for (auto i = static_cast<std::ptrdiff_t>(im.fusion.layers.size()) - 1; i >= 0; --i) {
    g = im.fusion.layers[static_cast<std::size_t>(i)]->backward(g);
  }
  if (!branches_trainable) return;

  SeqBatch g_text, g_audio;
  if (is_early_fusion(kind_)) {
    split_rows(g, text_pooled_width(), g_text, g_audio);
    branch_backward(*im.text_enc, nullptr, nullptr, &g_text);
    branch_backward(*im.audio_enc, nullptr, nullptr, &g_audio);
  } else {
    split_rows(g, kNumClasses, g_text, g_audio);
    branch_backward(*im.text_enc, im.text_head.get(), &g_text, nullptr);
    branch_backward(*im.audio_enc, im.audio_head.get(), &g_audio, nullptr);
  }
}

std::vector<nn::Param*> ModelGraph::parameters() {
  std::vector<nn::Param*> out;
  for (Layer* l : persistent_layers()) {
    for (nn::Param* p : l->params()) out.push_back(p);
  }
  return out;
}

std::vector<Layer*> ModelGraph::persistent_layers() {
  std::vector<Layer*> out;
  for (const auto& g : impl_->group_order) {
    for (Layer* l : impl_->groups.at(g)) {
      if (!l->params().empty() || !l->buffers().empty()) out.push_back(l);
    }
  }
  return out;
}

Layer& ModelGraph::layer(std::string_view name) {
  for (auto& [g, layers] : impl_->groups) {
    for (Layer* l : layers) {
      if (l->name() == name) return *l;
    }
  }
  throw Error("no layer named '" + std::string(name) + "'");
}

bool ModelGraph::has_layer(std::string_view name) const {
  for (const auto& [g, layers] : impl_->groups) {
    for (const Layer* l : layers) {
      if (l->name() == name) return true;
    }
  }
  return false;
}

std::vector<std::string> ModelGraph::groups() const {
  return impl_->group_order;
}

void ModelGraph::set_group_frozen(std::string_view group, bool frozen) {
  auto it = impl_->groups.find(group);
  if (it == impl_->groups.end()) throw Error("no layer group '" + std::string(group) + "'");
  for (Layer* l : it->second) l->set_frozen(frozen);
}

bool ModelGraph::group_frozen(std::string_view group) const {
  auto it = impl_->groups.find(group);
  if (it == impl_->groups.end()) throw Error("no layer group '" + std::string(group) + "'");
  return it->second.front()->frozen();
}

std::vector<std::string> ModelGraph::trainable_groups() const {
  std::vector<std::string> out;
  for (const auto& g : impl_->group_order) {
    const auto& layers = impl_->groups.at(g);
    const bool has_params = std::any_of(layers.begin(), layers.end(), [](Layer* l) { return !l->params().empty(); });
    if (has_params && !layers.front()->frozen()) out.push_back(g);
  }
  return out;
}

const SeqBatch& ModelGraph::last_text_embedding() const { return impl_->text_pooled; }
const SeqBatch& ModelGraph::last_audio_embedding() const { return impl_->audio_pooled; }

void ModelGraph::set_dropout_enabled(bool enabled) {
  if (impl_->dropout) impl_->dropout->set_enabled(enabled);
}

void ModelGraph::reseed_dropout(std::uint64_t seed) {
  if (impl_->dropout) impl_->dropout->reseed(seed);
}

void ModelGraph::round_to_float() {
  for (Layer* l : persistent_layers()) nn::round_to_float(*l);
}

nn::Checkpoint ModelGraph::to_checkpoint(std::string_view meta_json) {
  nlohmann::ordered_json header;
  header["system"] = std::string(to_string(kind_));
  header["model"] = nlohmann::json::parse(model_config_to_json(cfg_));
  header["text_dim"] = text_dim_;
  header["meta"] = nlohmann::json::parse(meta_json);
  nn::Checkpoint ckpt;
  ckpt.header = header.dump();
  for (Layer* l : persistent_layers()) ckpt.layers.push_back(nn::to_record(*l));
  return ckpt;
}

void ModelGraph::load_layers(const nn::Checkpoint& ckpt, std::string_view prefix) {
  std::size_t loaded = 0;
  for (Layer* l : persistent_layers()) {
    if (l->name().rfind(prefix, 0) != 0) continue;
    const auto* rec = ckpt.find(l->name());
    if (!rec) throw Error("checkpoint has no layer '" + l->name() + "'");
    nn::load_record(*l, *rec);
    ++loaded;
  }
  if (loaded == 0) throw Error("no layers with prefix '" + std::string(prefix) + "' to load");
}

// ---------------------------------------------------------------- free functions

ModelGraph build_model(SystemKind kind, const ModelConfig& cfg, std::size_t text_dim, std::uint64_t seed,
                       const PretrainedBranches& pretrained) {
  ModelGraph model(kind, cfg, text_dim, seed);
  if (needs_pretrained_branches(kind)) {
    if (!pretrained.audio || !pretrained.text) {
      throw Error("system " + std::string(to_string(kind)) + " needs pretrained audio and text branches");
    }
    if (checkpoint_system(*pretrained.audio) != SystemKind::kAudioOnly) {
      throw Error("pretrained audio checkpoint is not an audio_only model");
    }
    if (checkpoint_system(*pretrained.text) != SystemKind::kTextOnly) {
      throw Error("pretrained text checkpoint is not a text_only model");
    }
    model.load_layers(*pretrained.audio, "L_A");
    model.load_layers(*pretrained.text, "L_T");
  }
  return model;
}

SystemKind checkpoint_system(const nn::Checkpoint& ckpt) try {
  const auto header = nlohmann::json::parse(ckpt.header);
  return parse_system_kind(header.at("system").get<std::string>());
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed checkpoint header: ") + e.what());
}

std::string checkpoint_meta(const nn::Checkpoint& ckpt) try {
  const auto header = nlohmann::json::parse(ckpt.header);
  return header.contains("meta") ? header["meta"].dump() : "{}";
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed checkpoint header: ") + e.what());
}

ModelGraph load_model(const nn::Checkpoint& ckpt) try {
  const auto header = nlohmann::json::parse(ckpt.header);
  const auto kind = parse_system_kind(header.at("system").get<std::string>());
  const auto cfg = model_config_from_json(header.at("model").dump());
  ModelGraph model(kind, cfg, header.at("text_dim").get<std::size_t>(), 0);
  for (Layer* l : model.persistent_layers()) {
    const auto* rec = ckpt.find(l->name());
    if (!rec) throw Error("checkpoint has no layer '" + l->name() + "'");
    nn::load_record(*l, *rec);
  }
  return model;
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed checkpoint header: ") + e.what());
}

bool apply_training_strategy(ModelGraph& model, SystemKind kind) {
  if (!is_fusion(model.kind())) {
    if (is_fusion(kind)) {
      warn("training strategy of " + std::string(to_string(kind)) + " ignored for single-modality model");
      return false;
    }
    for (const auto& g : model.groups()) model.set_group_frozen(g, false);
    return true;
  }
  for (const auto& g : model.groups()) model.set_group_frozen(g, false);
  switch (strategy_of(kind)) {
    case Strategy::kPretrained:
      for (const auto& g : model.groups()) {
        if (g.rfind("L_", 0) == 0) model.set_group_frozen(g, true);
      }
      break;
    case Strategy::kWarmStart:
      for (const char* g : {"L_T1", "L_T2", "L_A1", "L_T5", "L_A4"}) {
        if (model.has_layer(g)) model.set_group_frozen(g, true);
      }
      break;
    default: break;
  }
  return true;
}

double train_step(ModelGraph& model, const nn::MaskedBatch* audio, const nn::MaskedBatch* text,
                  const ClassWeights& weights, nn::AdamState& adam) {
  const nn::MaskedBatch* labelled = uses_text(model.kind()) ? text : audio;
  if (!labelled || labelled->labels.size() != labelled->data.batch) throw Error("training batch has no labels");
  const auto out = model.forward(audio, text, Mode::kTrain);
  const auto loss = nn::weighted_softmax_xent(out.logits, labelled->labels, weights);
  if (!std::isfinite(loss.loss)) throw Error("non-finite training loss");
  auto params = model.parameters();
  for (nn::Param* p : params) p->zero_grad();
  model.backward(loss.grad_logits);
  if (nn::adam_step(params, adam) != nn::StepStatus::kApplied) {
    throw Error("non-finite gradient at optimizer step " + std::to_string(adam.step));
  }
  return loss.loss;
}

nn::GradCheckResult grad_check_model(ModelGraph& model, const nn::MaskedBatch* audio, const nn::MaskedBatch* text,
                                     const ClassWeights& weights, const nn::GradCheckOptions& options) {
  const nn::MaskedBatch* labelled = uses_text(model.kind()) ? text : audio;
  if (!labelled) throw Error("grad check needs a labelled batch");
  model.set_dropout_enabled(false);
  auto params = model.parameters();
  std::vector<nn::Param*> trainable;
  for (nn::Param* p : params) {
    if (!p->frozen) trainable.push_back(p);
  }
  auto loss = [&] {
    const auto out = model.forward(audio, text, Mode::kTrain);
    return nn::weighted_softmax_xent(out.logits, labelled->labels, weights).loss;
  };
  auto loss_and_grad = [&] {
    const auto out = model.forward(audio, text, Mode::kTrain);
    const auto res = nn::weighted_softmax_xent(out.logits, labelled->labels, weights);
    model.backward(res.grad_logits);
    return res.loss;
  };
  auto result = nn::grad_check(trainable, loss, loss_and_grad, options);
  model.set_dropout_enabled(true);
  return result;
}

}  // namespace ser
