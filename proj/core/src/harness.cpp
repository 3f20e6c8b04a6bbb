#include "ser/harness.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ser/binary_io.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string id_set_hash(const std::vector<std::string>& ids) {
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& id : sorted) {
    h = fnv1a64(id, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------- training

std::vector<ScoredPrediction> predict(ModelGraph& model, const std::vector<Example>& examples,
                                      std::size_t batch_size) {
  const bool audio = uses_audio(model.kind());
  const bool text = uses_text(model.kind());
  std::vector<ScoredPrediction> out;
  out.reserve(examples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto batch = make_batch(examples, idx, audio, text, model.text_dim());
    const auto res = model.forward(batch.audio ? &*batch.audio : nullptr, batch.text ? &*batch.text : nullptr,
                                   nn::Mode::kEval);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      ScoredPrediction p;
      p.id = examples[idx[b]].id;
      p.label = emotion_from_index(examples[idx[b]].label);
      std::copy_n(res.probs.row(b, 0), kNumClasses, p.probs.begin());
      out.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

std::vector<ScoredPrediction> score_snapshot(ModelGraph& model, const FoldData& data, std::size_t batch_size,
                                             const std::string& meta) {
  auto frozen_copy = load_model(model.to_checkpoint(meta));
  return predict(frozen_copy, data.test, batch_size);
}

}  // namespace

TrainOutput train_model(const TrainRequest& req, const FoldData& data) {
  if (data.train.empty()) throw Error("empty training set");
  if (data.test.empty()) throw Error("empty test set");
  if (req.batch_size == 0) throw Error("batch size must be positive");

  auto meta = ordered_json::parse(req.meta_json);
  if (data.norm) meta["norm_stats"] = ordered_json::parse(norm_stats_to_json(*data.norm));
  const std::string meta_text = meta.dump();

  ModelGraph model = build_model(req.system, req.model, uses_text(req.system) ? data.text_dim : 0,
                                 derive_seed(req.seed, "init"), req.pretrained);
  apply_training_strategy(model, req.system);
  model.reseed_dropout(derive_seed(req.seed, "dropout"));

  ClassCounts counts{};
  for (const auto& ex : data.train) ++counts[static_cast<std::size_t>(ex.label)];
  const ClassWeights weights = class_weights(counts);

  nn::AdamState adam;
  adam.schedule = req.lr;
  Rng rng(derive_seed(req.seed, "shuffle"));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::set<std::size_t> snapshots(req.snapshot_epochs.begin(), req.snapshot_epochs.end());
  const bool audio = uses_audio(req.system);
  const bool text = uses_text(req.system);

  TrainOutput out;
  out.log.epochs = req.epochs;
  out.log.truncated = data.truncated;
  if (snapshots.count(0)) out.snapshots[0] = score_snapshot(model, data, req.batch_size, meta_text);

  for (std::size_t epoch = 1; epoch <= req.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += req.batch_size) {
      const std::size_t end = std::min(order.size(), start + req.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto batch = make_batch(data.train, idx, audio, text, data.text_dim);
      loss_sum += train_step(model, batch.audio ? &*batch.audio : nullptr, batch.text ? &*batch.text : nullptr,
                             weights, adam);
      ++batches;
    }
    out.log.final_loss = loss_sum / static_cast<double>(batches);
    if (snapshots.count(epoch)) out.snapshots[epoch] = score_snapshot(model, data, req.batch_size, meta_text);
  }
  out.log.steps = adam.step;

  out.checkpoint = model.to_checkpoint(meta_text);
  auto eval_model = load_model(out.checkpoint);
  out.predictions = predict(eval_model, data.test, req.batch_size);
  return out;
}

// ---------------------------------------------------------------- run records

namespace {

ordered_json report_to_json(const MetricReport& r) {
  ordered_json j;
  j["av_rec"] = r.av_rec;
  j["av_auc"] = r.av_auc;
  j["recall"] = std::vector<double>(r.recall.begin(), r.recall.end());
  j["auc"] = std::vector<double>(r.auc.begin(), r.auc.end());
  j["n"] = std::vector<std::size_t>(r.n.begin(), r.n.end());
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.av_rec = j.at("av_rec").get<double>();
  r.av_auc = j.at("av_auc").get<double>();
  const auto recall = j.at("recall").get<std::vector<double>>();
  const auto auc = j.at("auc").get<std::vector<double>>();
  const auto n = j.at("n").get<std::vector<std::size_t>>();
  if (recall.size() != kNumClasses || auc.size() != kNumClasses || n.size() != kNumClasses) {
    throw Error("metric report needs 4 values per class field");
  }
  std::copy(recall.begin(), recall.end(), r.recall.begin());
  std::copy(auc.begin(), auc.end(), r.auc.begin());
  std::copy(n.begin(), n.end(), r.n.begin());
  return r;
}

std::string predictions_jsonl(const std::vector<ScoredPrediction>& preds) {
  std::string out;
  for (const auto& p : preds) out += serialize_prediction(p) + "\n";
  return out;
}

std::vector<ScoredPrediction> parse_predictions(const std::string& text) {
  std::vector<ScoredPrediction> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_prediction(line));
  }
  return out;
}

}  // namespace

std::string run_record_json(const RunRecord& record) {
  ordered_json j;
  j["label"] = record.label;
  j["system"] = record.system;
  j["config_hash"] = record.config_hash;
  j["seeds"] = record.seeds;
  j["per_seed"] = ordered_json::array();
  for (const auto& r : record.per_seed) j["per_seed"].push_back(report_to_json(r));
  j["aggregate"] = ordered_json::parse(seed_aggregate_json(record.aggregate));
  return j.dump(2) + "\n";
}

std::optional<dsp::NormStats> checkpoint_norm_stats(const nn::Checkpoint& ckpt) {
  const auto meta = nlohmann::json::parse(checkpoint_meta(ckpt));
  if (!meta.contains("norm_stats")) return std::nullopt;
  return norm_stats_from_json(meta["norm_stats"].dump());
}

RunRecord parse_run_record(std::string_view json) try {
  const auto j = nlohmann::json::parse(json);
  RunRecord r;
  r.label = j.at("label").get<std::string>();
  r.system = j.at("system").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const auto& s : j.at("per_seed")) r.per_seed.push_back(report_from_json(s));
  if (r.per_seed.size() != r.seeds.size()) throw Error("run record lists a different number of seeds and reports");
  r.aggregate = aggregate_seeds(r.per_seed);
  return r;
} catch (const nlohmann::json::exception& e) {
  throw Error(std::string("malformed run record: ") + e.what());
}

RunRecord load_run_record(const fs::path& run_dir) {
  const fs::path file = fs::is_directory(run_dir) ? run_dir / "record.json" : run_dir;
  return parse_run_record(io::read_text_file(file));
}

std::size_t choose_epoch(const std::vector<std::size_t>& candidates,
                         const std::vector<std::vector<double>>& per_seed_auc) {
  if (candidates.empty()) throw Error("no candidate epoch counts");
  if (per_seed_auc.size() != candidates.size()) throw Error("one score list per candidate is required");
  std::size_t best = 0;
  double best_median = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double med = quantile(per_seed_auc[i], 0.5);
    if (i == 0 || med > best_median || (med == best_median && candidates[i] < candidates[best])) {
      best = i;
      best_median = med;
    }
  }
  return candidates[best];
}

// ---------------------------------------------------------------- experiment

Experiment::Experiment(ExperimentConfig config) : cfg_(std::move(config)) {
  cfg_.validate();
  run_dir_ = run_directory(cfg_);
  data_ = load_dataset(cfg_, cfg_.system);
  if (!cfg_.paths.folds.empty()) {
    folds_ = load_folds(cfg_.paths.folds);
  } else {
    folds_ = make_folds(data_.manifest, cfg_.criterion, cfg_.k, cfg_.fold_seed);
  }
  for (const auto& f : folds_.folds) {
    for (const auto* ids : {&f.train_ids, &f.test_ids}) {
      for (const auto& id : *ids) {
        if (!data_.manifest.find(id)) throw Error("fold " + std::to_string(f.index) + " lists unknown utterance '" + id + "'");
      }
    }
  }
  fold_data_.resize(folds_.k());
  fold_once_ = std::make_unique<std::once_flag[]>(folds_.k());
}

const FoldData& Experiment::fold_data(std::size_t fold) {
  if (fold >= folds_.k()) throw Error("fold " + std::to_string(fold) + " out of range");
  std::call_once(fold_once_[fold], [&] {
    ExampleOptions opt;
    const bool both = needs_pretrained_branches(cfg_.system);
    opt.audio = uses_audio(cfg_.system) || both;
    opt.text = uses_text(cfg_.system) || both;
    opt.max_audio_len = cfg_.max_audio_len;
    opt.max_text_len = cfg_.max_text_len;
    fold_data_[fold] = std::make_unique<FoldData>(build_fold_data(data_, folds_.folds[fold], opt));
  });
  return *fold_data_[fold];
}

fs::path Experiment::job_dir(std::size_t fold, std::uint64_t seed) const {
  return run_dir_ / "jobs" / ("fold" + std::to_string(fold) + "-seed" + std::to_string(seed));
}

TrainRequest Experiment::request_for(SystemKind system, std::size_t fold, std::uint64_t seed,
                                     std::size_t epochs) const {
  TrainRequest r;
  r.system = system;
  r.model = cfg_.model;
  r.lr = system == cfg_.system ? cfg_.lr_schedule() : default_lr_schedule(system);
  r.epochs = epochs;
  r.batch_size = cfg_.batch_size;
  r.seed = seed;
  ordered_json meta;
  meta["fold"] = fold;
  meta["seed"] = seed;
  meta["train_ids_hash"] = id_set_hash(folds_.folds[fold].train_ids);
  meta["config_hash"] = config_hash(cfg_);
  r.meta_json = meta.dump();
  return r;
}

nn::Checkpoint Experiment::branch_checkpoint(SystemKind branch, std::size_t fold, std::uint64_t seed) {
  const std::string file =
      std::string(to_string(branch)) + "-fold" + std::to_string(fold) + "-seed" + std::to_string(seed) + ".ckpt";
  nn::Checkpoint ckpt;
  if (!cfg_.paths.pretrained_dir.empty()) {
    const fs::path path = cfg_.paths.pretrained_dir / file;
    if (!fs::exists(path)) throw Error("missing pretrained branch checkpoint '" + path.string() + "'");
    ckpt = nn::load_checkpoint(path);
  } else {
    const fs::path path = run_dir_ / "branches" / file;
    if (fs::exists(path)) {
      ckpt = nn::load_checkpoint(path);
    } else {
      auto out = train_model(request_for(branch, fold, seed, cfg_.effective_branch_epochs()), fold_data(fold));
      ++trained_jobs_;
      nn::save_checkpoint(path, out.checkpoint);
      ckpt = std::move(out.checkpoint);
    }
  }
  if (checkpoint_system(ckpt) != branch) {
    throw Error("checkpoint '" + file + "' is not a " + std::string(to_string(branch)) + " model");
  }
  const auto meta = nlohmann::json::parse(checkpoint_meta(ckpt));
  if (!meta.contains("train_ids_hash") ||
      meta["train_ids_hash"].get<std::string>() != id_set_hash(folds_.folds[fold].train_ids)) {
    throw Error("branch checkpoint '" + file + "' was not trained on fold " + std::to_string(fold) +
                "'s training set");
  }
  return ckpt;
}

TrainOutput Experiment::train_single(std::size_t fold, std::uint64_t seed) {
  const auto& data = fold_data(fold);
  auto req = request_for(cfg_.system, fold, seed, cfg_.epochs);
  nn::Checkpoint audio_ckpt, text_ckpt;
  if (needs_pretrained_branches(cfg_.system)) {
    audio_ckpt = branch_checkpoint(SystemKind::kAudioOnly, fold, seed);
    text_ckpt = branch_checkpoint(SystemKind::kTextOnly, fold, seed);
    req.pretrained = {&audio_ckpt, &text_ckpt};
  }
  auto out = train_model(req, data);
  ++trained_jobs_;
  return out;
}

std::vector<ScoredPrediction> Experiment::run_job(std::size_t fold, std::uint64_t seed) {
  const fs::path dir = job_dir(fold, seed);
  const fs::path pred_path = dir / "predictions.jsonl";
  if (fs::exists(pred_path)) return parse_predictions(io::read_text_file(pred_path));

  auto out = train_single(fold, seed);
  nn::save_checkpoint(dir / "model.ckpt", out.checkpoint);
  ordered_json log;
  log["fold"] = fold;
  log["seed"] = seed;
  log["epochs"] = out.log.epochs;
  log["steps"] = out.log.steps;
  log["final_loss"] = out.log.final_loss;
  log["truncated"] = {{"text", out.log.truncated.text}, {"audio", out.log.truncated.audio}};
  io::write_file_atomic(dir / "log.json", log.dump(2) + "\n");
  // Written last: its presence marks the job complete.
  io::write_file_atomic(pred_path, predictions_jsonl(out.predictions));
  return out.predictions;
}

RunRecord Experiment::run(std::ostream* progress) {
  fs::create_directories(run_dir_);
  io::write_file_atomic(run_dir_ / "config.json", config_to_json(cfg_));
  io::write_file_atomic(run_dir_ / "folds.jsonl", serialize_folds(folds_));

  struct Job {
    std::uint64_t seed;
    std::size_t fold;
  };
  std::vector<Job> jobs;
  for (auto seed : cfg_.seeds) {
    for (std::size_t f = 0; f < folds_.k(); ++f) jobs.push_back({seed, f});
  }
  std::vector<std::vector<ScoredPrediction>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_job(jobs[i].fold, jobs[i].seed);
        if (progress) {
          std::lock_guard lock(log_mutex);
          *progress << "done fold " << jobs[i].fold << " seed " << jobs[i].seed << '\n';
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(cfg_.workers, jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunRecord record;
  record.label = cfg_.name.empty() ? std::string(to_string(cfg_.system)) : cfg_.name;
  record.system = std::string(to_string(cfg_.system));
  record.config_hash = config_hash(cfg_);
  record.seeds = cfg_.seeds;
  for (std::size_t s = 0; s < cfg_.seeds.size(); ++s) {
    std::vector<std::vector<ScoredPrediction>> per_fold(results.begin() + static_cast<std::ptrdiff_t>(s * folds_.k()),
                                                        results.begin() + static_cast<std::ptrdiff_t>((s + 1) * folds_.k()));
    const auto report = evaluate_predictions(merge_fold_scores(per_fold));
    io::write_file_atomic(run_dir_ / "seeds" / ("seed" + std::to_string(cfg_.seeds[s]) + ".json"),
                          metric_report_json(report));
    record.per_seed.push_back(report);
  }
  record.aggregate = aggregate_seeds(record.per_seed);
  io::write_file_atomic(run_dir_ / "record.json", run_record_json(record));
  return record;
}

EpochSelection Experiment::select_epochs(const std::vector<std::size_t>& candidates,
                                         const std::vector<std::uint64_t>& selection_seeds) {
  if (candidates.empty()) throw Error("no candidate epoch counts");
  if (selection_seeds.empty()) throw Error("no selection seeds");
  EpochSelection sel;
  sel.candidates = candidates;
  sel.per_seed_auc.assign(candidates.size(), {});
  const std::size_t max_epochs = *std::max_element(candidates.begin(), candidates.end());
  for (auto seed : selection_seeds) {
    std::vector<std::vector<std::vector<ScoredPrediction>>> per_candidate(candidates.size());
    for (std::size_t f = 0; f < folds_.k(); ++f) {
      auto req = request_for(cfg_.system, f, seed, max_epochs);
      req.snapshot_epochs = candidates;
      nn::Checkpoint audio_ckpt, text_ckpt;
      if (needs_pretrained_branches(cfg_.system)) {
        audio_ckpt = branch_checkpoint(SystemKind::kAudioOnly, f, seed);
        text_ckpt = branch_checkpoint(SystemKind::kTextOnly, f, seed);
        req.pretrained = {&audio_ckpt, &text_ckpt};
      }
      auto out = train_model(req, fold_data(f));
      ++trained_jobs_;
      for (std::size_t c = 0; c < candidates.size(); ++c) per_candidate[c].push_back(out.snapshots.at(candidates[c]));
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      sel.per_seed_auc[c].push_back(evaluate_predictions(merge_fold_scores(per_candidate[c])).av_auc);
    }
  }
  for (const auto& v : sel.per_seed_auc) sel.median_auc.push_back(quantile(v, 0.5));
  sel.best = choose_epoch(candidates, sel.per_seed_auc);
  return sel;
}

}  // namespace ser
