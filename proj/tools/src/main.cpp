// ser: command-line front end for feature extraction, synthetic corpora,
// fold construction, training, evaluation, and reporting.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ser/binary_io.h"
#include "ser/config.h"
#include "ser/dataset.h"
#include "ser/dsp.h"
#include "ser/error.h"
#include "ser/folds.h"
#include "ser/harness.h"
#include "ser/metrics.h"
#include "ser/models.h"
#include "ser/random.h"
#include "ser/report.h"
#include "ser/synth.h"
#include "ser/wav.h"

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  std::size_t workers = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", overrides, "Override a config key, e.g. model.size=small");
    cmd->add_option("-j,--workers", workers, "Parallel (fold, seed) jobs");
  }

  ser::ExperimentConfig load() const {
    auto cfg = ser::load_config(path);
    for (const auto& o : overrides) ser::apply_override(cfg, o);
    if (workers) cfg.workers = workers;
    cfg.validate();
    return cfg;
  }
};

void print_aggregate(const ser::RunRecord& r) {
  std::printf("%s  AvRec %.4f (IQR %.4f)  AvAUC %.4f (IQR %.4f)\n", r.label.c_str(), r.aggregate.rec.median,
              r.aggregate.rec.iqr(), r.aggregate.auc.median, r.aggregate.auc.iqr());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech emotion recognition with acoustic/text fusion"};
  app.require_subcommand(1);

  // extract-features
  auto* extract = app.add_subcommand("extract-features", "Compute per-frame acoustic descriptors from wav files");
  std::string ex_manifest, ex_root, ex_out, ex_folds;
  int ex_fold = -1;
  extract->add_option("--manifest", ex_manifest)->required()->check(CLI::ExistingFile);
  extract->add_option("--audio-root", ex_root, "Base directory of audio_ref paths (default: manifest directory)");
  extract->add_option("-o,--out", ex_out)->required();
  extract->add_option("--folds", ex_folds, "Write normalized features using this fold's training statistics");
  extract->add_option("--fold", ex_fold);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic bimodal corpus");
  ser::SynthSpec spec;
  ser::CorpusOptions corpus;
  std::string sy_out;
  bool no_audio = false;
  synth->add_option("-o,--out", sy_out)->required();
  synth->add_option("--utterances", spec.n_utts)->capture_default_str();
  synth->add_option("--speakers", spec.n_speakers)->capture_default_str();
  synth->add_option("--scripts", spec.n_scripts)->capture_default_str();
  synth->add_option("--lines-per-script", spec.lines_per_script)->capture_default_str();
  synth->add_option("--audio-informativeness", spec.audio_informativeness)->capture_default_str();
  synth->add_option("--text-informativeness", spec.text_informativeness)->capture_default_str();
  synth->add_option("--negation-rate", spec.negation_rate)->capture_default_str();
  synth->add_option("--folds", spec.folds)->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--embedding-dim", corpus.embedding_dim)->capture_default_str();
  synth->add_option("--embedding-seed", corpus.embedding_seed)->capture_default_str();
  synth->add_flag("--no-audio", no_audio, "Skip writing wav files");

  // make-folds
  auto* mk = app.add_subcommand("make-folds", "Build cross-validation folds");
  std::string mf_manifest, mf_criterion = "sp", mf_out;
  std::size_t mf_k = 5;
  std::uint64_t mf_seed = 0;
  bool mf_no_improv = false;
  mk->add_option("--manifest", mf_manifest)->required()->check(CLI::ExistingFile);
  mk->add_option("--criterion", mf_criterion, "rand, sp, or sp_sc:<script>")->capture_default_str();
  mk->add_option("-k", mf_k)->capture_default_str();
  mk->add_option("--seed", mf_seed)->capture_default_str();
  mk->add_flag("--no-improv-train", mf_no_improv, "SP_SC: keep improvised utterances out of training");
  mk->add_option("-o,--out", mf_out)->required();

  // audit-folds
  auto* audit = app.add_subcommand("audit-folds", "Report speaker and script overlap between train and test");
  std::string au_manifest, au_folds, au_json;
  bool au_require_clean = false;
  audit->add_option("--manifest", au_manifest)->required()->check(CLI::ExistingFile);
  audit->add_option("--folds", au_folds)->required()->check(CLI::ExistingFile);
  audit->add_option("--json", au_json, "Also write the report as JSON");
  audit->add_flag("--require-clean", au_require_clean, "Exit nonzero on any overlap");

  // train
  auto* train = app.add_subcommand("train", "Train every (fold, seed) job of a config, resuming finished ones");
  ConfigArgs train_cfg;
  train_cfg.attach(train);
  int tr_fold = -1;
  std::int64_t tr_seed = -1;
  train->add_option("--fold", tr_fold, "Run only this fold (requires --seed)");
  train->add_option("--seed", tr_seed, "Run only this seed (requires --fold)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a fold's test set with a checkpoint");
  ConfigArgs eval_cfg;
  eval_cfg.attach(eval);
  std::string ev_ckpt, ev_out;
  std::size_t ev_fold = 0;
  eval->add_option("--checkpoint", ev_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--fold", ev_fold)->required();
  eval->add_option("-o,--out", ev_out, "Output directory (default: next to the checkpoint)");

  // report
  auto* rep = app.add_subcommand("report", "Tabulate and plot run records");
  std::vector<std::string> rp_runs;
  std::string rp_out = ".";
  rep->add_option("runs", rp_runs, "Run directories or record.json files, in table order")->required();
  rep->add_option("-o,--out", rp_out)->capture_default_str();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of a model's gradients");
  std::string gc_system = "ef_cs", gc_size = "small";
  std::size_t gc_text_dim = 8, gc_batch = 3, gc_entries = 0;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  bool gc_scalar_mix = false;
  gc->add_option("--system", gc_system)->capture_default_str();
  gc->add_option("--size", gc_size)->capture_default_str();
  gc->add_option("--text-dim", gc_text_dim)->capture_default_str();
  gc->add_option("--batch", gc_batch)->capture_default_str();
  gc->add_option("--entries", gc_entries, "Entries checked per tensor (0: all)")->capture_default_str();
  gc->add_option("--seed", gc_seed)->capture_default_str();
  gc->add_option("--tolerance", gc_tol)->capture_default_str();
  double gc_eps = 1e-5;
  gc->add_option("--eps", gc_eps, "Finite-difference step")->capture_default_str();
  gc->add_flag("--scalar-mix", gc_scalar_mix, "Late fusion through scalar modality weights");

  // select-epochs
  auto* sel = app.add_subcommand("select-epochs", "Pick the epoch count with the best median AvAUC");
  ConfigArgs sel_cfg;
  sel_cfg.attach(sel);
  std::vector<std::size_t> se_candidates;
  std::vector<std::uint64_t> se_seeds;
  sel->add_option("--candidates", se_candidates)->required()->delimiter(',');
  sel->add_option("--selection-seeds", se_seeds, "Default: the first 5 config seeds")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      const auto manifest = ser::load_manifest(ex_manifest);
      const fs::path root = ex_root.empty() ? fs::path(ex_manifest).parent_path() : fs::path(ex_root);
      std::map<std::string, ser::dsp::LldMatrix> lld;
      for (const auto& r : manifest.records) {
        const auto wave = ser::read_wav(root / r.audio_ref);
        if (wave.sample_rate != ser::dsp::kSupportedSampleRate) {
          throw ser::Error("'" + r.audio_ref + "' is sampled at " + std::to_string(wave.sample_rate) +
                           " Hz; only 16000 Hz is supported");
        }
        lld.emplace(r.id, ser::dsp::to_matrix(ser::dsp::extract_lld(wave.samples, {})));
      }
      if (ex_folds.empty()) {
        ser::dsp::write_lld_cache(ex_out, lld);
        std::printf("wrote %zu raw descriptor sequences to %s\n", lld.size(), ex_out.c_str());
      } else {
        const auto folds = ser::load_folds(ex_folds);
        if (ex_fold < 0 || static_cast<std::size_t>(ex_fold) >= folds.k()) throw ser::Error("--fold out of range");
        const auto& fold = folds.folds[static_cast<std::size_t>(ex_fold)];
        std::vector<ser::dsp::LldMatrix> train;
        for (const auto& id : fold.train_ids) train.push_back(lld.at(id));
        const auto stats = ser::dsp::fit_norm_stats(train);
        std::vector<ser::dsp::FeatureSequence> out;
        for (const auto& [id, m] : lld) out.push_back(ser::dsp::finalize_features(m, stats, id));
        ser::dsp::write_feature_cache(ex_out, out);
        std::printf("wrote %zu normalized feature sequences to %s\n", out.size(), ex_out.c_str());
      }
    } else if (*synth) {
      corpus.write_audio = !no_audio;
      const auto data = ser::synth_dataset(spec);
      const auto files = ser::write_corpus(data, sy_out, corpus);
      std::printf("wrote %zu utterances: %s\n", data.manifest.records.size(), files.manifest.c_str());
    } else if (*mk) {
      const auto manifest = ser::load_manifest(mf_manifest);
      auto criterion = ser::parse_fold_criterion(mf_criterion);
      criterion.improv_in_train = !mf_no_improv;
      const auto folds = ser::make_folds(manifest, criterion, mf_k, mf_seed);
      ser::save_folds(folds, mf_out);
      std::printf("wrote %zu folds to %s\n", folds.k(), mf_out.c_str());
    } else if (*audit) {
      const auto manifest = ser::load_manifest(au_manifest);
      const auto folds = ser::load_folds(au_folds);
      const auto report = ser::audit_leakage(folds, manifest);
      std::cout << ser::leakage_report_table(report);
      if (!au_json.empty()) ser::io::write_file_atomic(au_json, ser::leakage_report_json(report));
      if (au_require_clean && !report.clean()) return 3;
    } else if (*train) {
      ser::Experiment exp(train_cfg.load());
      std::printf("run directory: %s\n", exp.run_dir().c_str());
      if ((tr_fold >= 0) != (tr_seed >= 0)) throw ser::Error("--fold and --seed must be given together");
      if (tr_fold >= 0) {
        const auto preds = exp.run_job(static_cast<std::size_t>(tr_fold), static_cast<std::uint64_t>(tr_seed));
        std::printf("fold %d seed %lld: %zu test predictions\n", tr_fold, static_cast<long long>(tr_seed), preds.size());
      } else {
        const auto record = exp.run(&std::cerr);
        print_aggregate(record);
      }
    } else if (*eval) {
      const auto cfg = eval_cfg.load();
      const auto ckpt = ser::nn::load_checkpoint(ev_ckpt);
      auto model = ser::load_model(ckpt);
      const auto data = ser::load_dataset(cfg, model.kind());
      const auto folds = cfg.paths.folds.empty() ? ser::make_folds(data.manifest, cfg.criterion, cfg.k, cfg.fold_seed)
                                                 : ser::load_folds(cfg.paths.folds);
      if (ev_fold >= folds.k()) throw ser::Error("--fold out of range");
      const auto norm = ser::checkpoint_norm_stats(ckpt);
      ser::ExampleOptions opt;
      opt.audio = ser::uses_audio(model.kind());
      opt.text = ser::uses_text(model.kind());
      opt.max_audio_len = cfg.max_audio_len;
      opt.max_text_len = cfg.max_text_len;
      const auto examples = ser::build_examples(data, folds.folds[ev_fold].test_ids, norm, opt);
      const auto preds = ser::predict(model, examples, cfg.batch_size);
      const fs::path out = ev_out.empty() ? fs::path(ev_ckpt).parent_path() : fs::path(ev_out);
      std::string lines;
      for (const auto& p : preds) lines += ser::serialize_prediction(p) + "\n";
      ser::io::write_file_atomic(out / "eval_predictions.jsonl", lines);
      const auto report = ser::evaluate_predictions(preds);
      ser::io::write_file_atomic(out / "eval_metrics.json", ser::metric_report_json(report));
      std::printf("AvRec %.4f  AvAUC %.4f\n", report.av_rec, report.av_auc);
    } else if (*rep) {
      std::vector<ser::RunRecord> records;
      for (const auto& r : rp_runs) records.push_back(ser::load_run_record(r));
      ser::write_report(records, rp_out);
      std::cout << ser::report_table(records);
    } else if (*gc) {
      const auto kind = ser::parse_system_kind(gc_system);
      auto cfg = ser::ModelConfig::for_variant(ser::parse_size_variant(gc_size));
      cfg.lf_scalar_mix = gc_scalar_mix;
      auto model = ser::build_model(kind, cfg, ser::uses_text(kind) ? gc_text_dim : 0, gc_seed);
      if (ser::needs_pretrained_branches(kind)) ser::apply_training_strategy(model, kind);
      ser::Rng rng(ser::derive_seed(gc_seed, "gradcheck-batch"));
      auto random_batch = [&](std::size_t dim, std::size_t max_steps) {
        ser::nn::MaskedBatch mb;
        mb.data = ser::nn::SeqBatch(gc_batch, max_steps, dim);
        for (std::size_t b = 0; b < gc_batch; ++b) {
          mb.data.lengths[b] = 1 + static_cast<std::size_t>(rng.uniform_int(max_steps));
          for (std::size_t t = 0; t < mb.data.lengths[b]; ++t) {
            for (std::size_t d = 0; d < dim; ++d) mb.data.row(b, t)[d] = rng.normal();
          }
          mb.ids.push_back("u" + std::to_string(b));
          mb.labels.push_back(static_cast<int>(b % ser::kNumClasses));
        }
        return mb;
      };
      const auto audio = random_batch(ser::kAudioInputDim, 12);
      const auto text = random_batch(gc_text_dim, 6);
      ser::ClassWeights w{1.0, 1.5, 0.75, 1.25};
      ser::nn::GradCheckOptions opt;
      opt.max_entries_per_param = gc_entries;
      opt.seed = gc_seed;
      opt.eps = gc_eps;
      const auto res = ser::grad_check_model(model, ser::uses_audio(kind) ? &audio : nullptr,
                                             ser::uses_text(kind) ? &text : nullptr, w, opt);
      std::printf("%s: max relative error %.3e over %zu entries (worst %s[%zu]: analytic %.6e, numeric %.6e)\n",
                  gc_system.c_str(), res.max_rel_error, res.entries_checked, res.worst_param.c_str(), res.worst_index,
                  res.worst_analytic, res.worst_numeric);
      if (!(res.max_rel_error < gc_tol)) return 4;
    } else if (*sel) {
      ser::Experiment exp(sel_cfg.load());
      if (se_seeds.empty()) {
        const auto& s = exp.config().seeds;
        se_seeds.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(5, s.size())));
      }
      const auto res = exp.select_epochs(se_candidates, se_seeds);
      for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        std::printf("epochs %zu: median AvAUC %.4f\n", res.candidates[i], res.median_auc[i]);
      }
      std::printf("selected %zu\n", res.best);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
