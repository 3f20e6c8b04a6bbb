#include "ser/dataset.h"

#include <algorithm>
#include <json.hpp>

#include "ser/binary_io.h"
#include "ser/error.h"

namespace ser {

Dataset load_dataset(const ExperimentConfig& cfg, SystemKind system) {
  Dataset d;
  if (cfg.paths.manifest.empty()) throw Error("config has no manifest path");
  d.manifest = load_manifest(cfg.paths.manifest);
  const bool pretrained = needs_pretrained_branches(system);
  const bool audio = uses_audio(system) || pretrained;
  const bool text = uses_text(system) || pretrained;

  if (audio) {
    if (cfg.paths.features.empty()) throw Error("system " + std::string(to_string(system)) + " needs features");
    auto records = io::read_matrix_file(cfg.paths.features);
    if (records.empty()) throw Error("feature cache '" + cfg.paths.features.string() + "' is empty");
    if (records.front().cols == dsp::kLldDim) {
      d.raw_audio = dsp::read_lld_cache(cfg.paths.features);
    } else {
      for (auto& s : dsp::read_feature_cache(cfg.paths.features)) {
        const std::string id = s.id;
        d.final_audio.emplace(id, std::move(s));
      }
    }
    for (const auto& r : d.manifest.records) {
      const bool found = d.raw_features() ? d.raw_audio.count(r.id) != 0 : d.final_audio.count(r.id) != 0;
      if (!found) throw Error("no acoustic features for utterance '" + r.id + "'");
    }
  }
  if (text) {
    if (cfg.paths.embeddings.empty()) throw Error("system " + std::string(to_string(system)) + " needs embeddings");
    const std::size_t dim = cfg.text_dim ? cfg.text_dim : embedding_dim_of(cfg.paths.embeddings);
    d.embeddings = load_embeddings(cfg.paths.embeddings, dim);
    for (const auto& r : d.manifest.records) {
      if (!d.embeddings->contains(r.text_ref)) throw Error("no embedding for utterance '" + r.id + "'");
    }
  }
  return d;
}

std::vector<Example> build_examples(const Dataset& data, const std::vector<std::string>& ids,
                                    const std::optional<dsp::NormStats>& norm, const ExampleOptions& options,
                                    TruncationCount* truncated) {
  if (options.audio && !data.has_audio()) throw Error("dataset has no acoustic features");
  if (options.text && !data.embeddings) throw Error("dataset has no embeddings");
  if (options.audio && data.raw_features() && !norm) throw Error("raw features need normalization statistics");
  std::vector<Example> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto* rec = data.manifest.find(id);
    if (!rec) throw Error("unknown utterance '" + id + "'");
    Example ex;
    ex.id = id;
    ex.label = index_of(rec->label);
    if (options.audio) {
      dsp::FeatureSequence seq;
      if (data.raw_features()) {
        seq = dsp::finalize_features(data.raw_audio.at(id), *norm, id);
      } else {
        seq = data.final_audio.at(id);
      }
      if (seq.steps == 0) throw Error("utterance '" + id + "' has no acoustic frames");
      ex.audio_steps = std::min(seq.steps, options.max_audio_len);
      if (ex.audio_steps < seq.steps && truncated) ++truncated->audio;
      ex.audio.assign(seq.values.begin(), seq.values.begin() + static_cast<std::ptrdiff_t>(ex.audio_steps * dsp::kFeatureDim));
    }
    if (options.text) {
      const auto& emb = data.embeddings->at(rec->text_ref);
      ex.text_steps = std::min(emb.steps, options.max_text_len);
      if (ex.text_steps < emb.steps && truncated) ++truncated->text;
      ex.text.assign(emb.values.begin(), emb.values.begin() + static_cast<std::ptrdiff_t>(ex.text_steps * emb.dim));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

FoldData build_fold_data(const Dataset& data, const Fold& fold, const ExampleOptions& options) {
  FoldData fd;
  fd.text_dim = options.text ? data.text_dim() : 0;
  if (options.audio && data.raw_features()) {
    std::vector<dsp::LldMatrix> train_seqs;
    train_seqs.reserve(fold.train_ids.size());
    for (const auto& id : fold.train_ids) {
      auto it = data.raw_audio.find(id);
      if (it == data.raw_audio.end()) throw Error("no acoustic features for utterance '" + id + "'");
      train_seqs.push_back(it->second);
    }
    fd.norm = dsp::fit_norm_stats(train_seqs);
  }
  fd.train = build_examples(data, fold.train_ids, fd.norm, options, &fd.truncated);
  fd.test = build_examples(data, fold.test_ids, fd.norm, options, &fd.truncated);
  return fd;
}

namespace {

nn::MaskedBatch pack(std::span<const Example> examples, std::span<const std::size_t> indices, bool audio,
                     std::size_t dim) {
  std::size_t steps = 0;
  for (auto i : indices) steps = std::max(steps, audio ? examples[i].audio_steps : examples[i].text_steps);
  nn::MaskedBatch mb;
  mb.data = nn::SeqBatch(indices.size(), steps, dim);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& ex = examples[indices[b]];
    const auto n = audio ? ex.audio_steps : ex.text_steps;
    const auto& src = audio ? ex.audio : ex.text;
    mb.data.lengths[b] = n;
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n * dim), mb.data.row(b, 0));
    mb.ids.push_back(ex.id);
    mb.labels.push_back(ex.label);
  }
  return mb;
}

}  // namespace

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices, bool audio, bool text,
                 std::size_t text_dim) {
  if (indices.empty()) throw Error("empty batch");
  Batch b;
  if (audio) b.audio = pack(examples, indices, true, dsp::kFeatureDim);
  if (text) b.text = pack(examples, indices, false, text_dim);
  return b;
}

std::string norm_stats_to_json(const dsp::NormStats& stats) {
  nlohmann::ordered_json j;
  j["mean"] = std::vector<double>(stats.mean.begin(), stats.mean.end());
  j["std"] = std::vector<double>(stats.std.begin(), stats.std.end());
  return j.dump();
}

dsp::NormStats norm_stats_from_json(std::string_view json) try {
  const auto j = nlohmann::json::parse(json);
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std = j.at("std").get<std::vector<double>>();
  if (mean.size() != dsp::kLldDim || std.size() != dsp::kLldDim) throw Error("normalization statistics need 18 values");
  dsp::NormStats s;
  std::copy(mean.begin(), mean.end(), s.mean.begin());
  std::copy(std.begin(), std.end(), s.std.begin());
  return s;
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed normalization statistics: ") + e.what());
}

}  // namespace ser
