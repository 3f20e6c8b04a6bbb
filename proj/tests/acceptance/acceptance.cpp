// Acceptance checks. One line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ser/binary_io.h"
#include "ser/config.h"
#include "ser/dsp.h"
#include "ser/folds.h"
#include "ser/harness.h"
#include "ser/metrics.h"
#include "ser/models.h"
#include "ser/report.h"
#include "ser/synth.h"
#include "support.h"

namespace fs = std::filesystem;
using namespace ser;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

constexpr std::size_t kTextDim = 16;

struct Inputs {
  nn::MaskedBatch audio;
  nn::MaskedBatch text;
  explicit Inputs(std::uint64_t seed, std::size_t batch = 4) {
    Rng rng(seed);
    audio = testing::random_batch(rng, batch, 40, kAudioInputDim);
    text = testing::random_batch(rng, batch, 12, kTextDim);
  }
};

/// Untrained single-modality models serialized as branch checkpoints.
struct Branches {
  nn::Checkpoint audio;
  nn::Checkpoint text;
  explicit Branches(const ModelConfig& cfg) {
    audio = build_model(SystemKind::kAudioOnly, cfg, 0, 101).to_checkpoint();
    text = build_model(SystemKind::kTextOnly, cfg, kTextDim, 102).to_checkpoint();
  }
  PretrainedBranches ptr() const { return {&audio, &text}; }
};

std::map<std::string, std::string> layer_bytes(ModelGraph& m, const std::string& prefix) {
  std::map<std::string, std::string> out;
  for (auto* l : m.persistent_layers())
    if (l->name().rfind(prefix, 0) == 0) out[l->name()] = nn::encode_layer(nn::to_record(*l));
  return out;
}

std::map<std::string, std::string> record_bytes(const nn::Checkpoint& ck, const std::string& prefix) {
  std::map<std::string, std::string> out;
  for (const auto& r : ck.layers)
    if (r.name.rfind(prefix, 0) == 0) out[r.name] = nn::encode_layer(r);
  return out;
}

// ---------------------------------------------------------------------------

ModelConfig narrow_widths() {
  auto cfg = ModelConfig::for_variant(SizeVariant::kSmall);
  cfg.text = {8, 8, 3};
  cfg.audio = {8, 9};
  cfg.ef_hidden = 8;
  return cfg;
}

// Every entry of narrow models, then a seeded sample of each tensor at the
// small variant's widths.
Outcome gradient_correctness() {
  const Stopwatch clock;
  double worst = 0.0;
  std::string detail;
  for (const bool full : {true, false}) {
    const auto cfg = full ? narrow_widths() : ModelConfig::for_variant(SizeVariant::kSmall);
    detail += full ? "all entries, narrow:" : " | 64 per tensor, small:";
    for (SystemKind kind : {SystemKind::kTextOnly, SystemKind::kAudioOnly, SystemKind::kEfCs, SystemKind::kLfCs}) {
      auto model = build_model(kind, cfg, uses_text(kind) ? kTextDim : 0, 7);
      const Inputs in(8, 3);
      nn::GradCheckOptions opt;
      opt.max_entries_per_param = full ? 0 : 64;
      const auto res = grad_check_model(model, uses_audio(kind) ? &in.audio : nullptr,
                                        uses_text(kind) ? &in.text : nullptr, {1.0, 1.5, 0.75, 1.25}, opt);
      worst = std::max(worst, res.max_rel_error);
      detail += fmt(" %s %.1e/%zu", std::string(to_string(kind)).c_str(), res.max_rel_error, res.entries_checked);
    }
  }
  const double secs = clock.seconds();
  return {worst < 1e-4 && secs < 120.0, detail + fmt(" [%.1f s]", secs)};
}

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  long long halves = 0;
  for (double p : pos)
    for (double n : neg) halves += p > n ? 2 : (p == n ? 1 : 0);
  return static_cast<double>(halves) / (2.0 * static_cast<double>(pos.size() * neg.size()));
}

Outcome auc_oracle() {
  Rng rng(2024);
  std::size_t mismatches = 0, tied_sets = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 8 + rng.uniform_int(193);
    const std::size_t levels = 2 + rng.uniform_int(6);
    std::vector<ScoredPrediction> preds;
    for (std::size_t i = 0; i < n; ++i) {
      ScoredPrediction p;
      p.id = std::to_string(i);
      double sum = 0.0;
      for (auto& v : p.probs) sum += v = 1.0 + static_cast<double>(rng.uniform_int(levels));
      for (auto& v : p.probs) v /= sum;
      // Exact duplicates of earlier rows.
      if (i > 0 && rng.bernoulli(0.2)) p.probs = preds[rng.uniform_int(i)].probs;
      p.label = static_cast<Emotion>(i < kNumClasses ? i : rng.uniform_int(kNumClasses));
      preds.push_back(p);
    }
    const auto got = auc_metrics(preds);
    bool has_tie = false;
    for (int k = 0; k < kNumClasses; ++k) {
      std::vector<double> pos, neg;
      for (const auto& p : preds) (static_cast<int>(p.label) == k ? pos : neg).push_back(p.probs[k]);
      std::set<double> seen_pos(pos.begin(), pos.end());
      for (double v : neg) has_tie |= seen_pos.count(v) > 0;
      if (got.auc[k] != brute_auc(pos, neg)) ++mismatches;
    }
    tied_sets += has_tie;
  }
  return {mismatches == 0, fmt("%zu mismatching classes over 1000 sets (%zu with cross-class ties)", mismatches,
                               tied_sets)};
}

double max_abs_diff(const nn::SeqBatch& a, const nn::SeqBatch& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
  return d;
}

Outcome masking_invariance() {
  const auto cfg = ModelConfig::for_variant(SizeVariant::kSmall);
  const Branches br(cfg);
  double worst = 0.0;
  std::size_t cases = 0;
  for (SystemKind kind : {SystemKind::kAudioOnly, SystemKind::kTextOnly, SystemKind::kEfCs, SystemKind::kEfPt,
                          SystemKind::kEfWs, SystemKind::kLfCs, SystemKind::kLfPt, SystemKind::kLfWs}) {
    auto model = build_model(kind, cfg, uses_text(kind) ? kTextDim : 0, 31,
                             needs_pretrained_branches(kind) ? br.ptr() : PretrainedBranches{});
    const Inputs in(32, 5);
    const auto* a = uses_audio(kind) ? &in.audio : nullptr;
    const auto* t = uses_text(kind) ? &in.text : nullptr;
    const auto base = model.forward(a, t, nn::Mode::kEval);
    for (std::size_t extra : {1, 3, 17, 50}) {
      const auto pa = testing::pad_more(in.audio, extra);
      const auto pt = testing::pad_more(in.text, extra);
      const auto out = model.forward(a ? &pa : nullptr, t ? &pt : nullptr, nn::Mode::kEval);
      worst = std::max({worst, max_abs_diff(base.logits, out.logits), max_abs_diff(base.probs, out.probs)});
      ++cases;
    }
  }
  return {worst < 1e-6, fmt("max output change %.2e over %zu padded batches", worst, cases)};
}

Outcome freeze_contracts() {
  const auto cfg = ModelConfig::for_variant(SizeVariant::kSmall);
  const Branches br(cfg);
  const ClassWeights w{1.0, 1.0, 1.0, 1.0};

  auto pt = build_model(SystemKind::kEfPt, cfg, kTextDim, 41, br.ptr());
  apply_training_strategy(pt, SystemKind::kEfPt);
  const auto head_before = layer_bytes(pt, "F_");
  nn::AdamState adam_pt;
  adam_pt.schedule = default_lr_schedule(SystemKind::kEfPt);
  for (int i = 0; i < 100; ++i) {
    const Inputs in(1000 + i, 8);
    train_step(pt, &in.audio, &in.text, w, adam_pt);
  }
  std::size_t pt_layers = 0, pt_changed = 0;
  for (const auto& [prefix, ck] : {std::pair{"L_A", &br.audio}, std::pair{"L_T", &br.text}}) {
    const auto want = record_bytes(*ck, prefix);
    for (const auto& [name, bytes] : layer_bytes(pt, prefix)) {
      ++pt_layers;
      if (!want.count(name) || want.at(name) != bytes) ++pt_changed;
    }
  }
  const bool head_trained = layer_bytes(pt, "F_") != head_before;

  auto ws = build_model(SystemKind::kEfWs, cfg, kTextDim, 42, br.ptr());
  apply_training_strategy(ws, SystemKind::kEfWs);
  auto before = layer_bytes(ws, "L_");
  nn::AdamState adam_ws;
  adam_ws.schedule = default_lr_schedule(SystemKind::kEfWs);
  for (int i = 0; i < 100; ++i) {
    const Inputs in(2000 + i, 8);
    train_step(ws, &in.audio, &in.text, w, adam_ws);
  }
  const auto after = layer_bytes(ws, "L_");
  bool ws_ok = true;
  std::string ws_detail;
  for (const char* name : {"L_T1", "L_T1.bn", "L_T2", "L_T2.bn", "L_A1", "L_A1.bn"}) {
    if (after.at(name) != before.at(name)) {
      ws_ok = false;
      ws_detail += std::string(" ") + name + " moved";
    }
  }
  for (const char* name : {"L_T3", "L_A2"}) {
    if (after.at(name) == before.at(name)) {
      ws_ok = false;
      ws_detail += std::string(" ") + name + " unchanged";
    }
  }
  const bool pass = pt_layers >= 6 && pt_changed == 0 && head_trained && ws_ok;
  return {pass, fmt("PT: %zu/%zu branch layers bit-identical, head %s; WS: %s", pt_layers - pt_changed, pt_layers,
                    head_trained ? "trained" : "unchanged", ws_ok ? "L_T1/L_T2/L_A1 fixed, L_T3/L_A2 updated"
                                                                  : ws_detail.c_str())};
}

Outcome lr_schedule() {
  bool ok = true;
  std::string detail;
  for (SystemKind k : {SystemKind::kAudioOnly, SystemKind::kTextOnly, SystemKind::kEfCs, SystemKind::kEfPt,
                       SystemKind::kLfCs}) {
    const auto s = default_lr_schedule(k);
    ok &= nn::lr_at(0, s) == 0.0 && std::abs(nn::lr_at(40, s) - 0.0007) < 1e-15 &&
          std::abs(nn::lr_at(400, s) - 0.0007) < 1e-15;
  }
  detail += fmt("standard lr(0)=%g lr(20)=%g lr(40)=%g", nn::lr_at(0, default_lr_schedule(SystemKind::kEfCs)),
                nn::lr_at(20, default_lr_schedule(SystemKind::kEfCs)),
                nn::lr_at(40, default_lr_schedule(SystemKind::kEfCs)));
  const auto lf = default_lr_schedule(SystemKind::kLfPt);
  bool lf_ok = true;
  for (std::size_t step = 0; step <= 2000; ++step) lf_ok &= nn::lr_at(step, lf) == 0.01;
  ok &= lf_ok;
  detail += fmt("; lf_pt constant %g over steps 0..2000: %s", nn::lr_at(0, lf), lf_ok ? "yes" : "no");
  return {ok, detail};
}

Outcome fold_leakage() {
  SynthSpec spec;
  spec.n_utts = 600;
  spec.min_duration = 0.2;
  spec.max_duration = 0.25;
  const auto manifest = synth_dataset(spec).manifest;
  const auto sp_sc = audit_leakage(make_folds(manifest, FoldCriterion::sp_sc("script03"), 5, 0), manifest);
  const auto sp = audit_leakage(make_folds(manifest, FoldCriterion::sp(), 5, 0), manifest);
  const auto rnd = audit_leakage(make_folds(manifest, FoldCriterion::rand(), 5, 0), manifest);
  const bool pass = sp_sc.clean() && !sp.any_speaker_overlap() && sp.any_script_overlap() &&
                    rnd.any_speaker_overlap() && rnd.any_script_overlap();
  auto describe = [](const LeakageReport& r) {
    return r.clean() ? std::string("clean")
                     : std::string(r.any_speaker_overlap() ? "speaker" : "") +
                           (r.any_speaker_overlap() && r.any_script_overlap() ? "+" : "") +
                           (r.any_script_overlap() ? "script" : "") + " overlap";
  };
  return {pass, "SP_SC " + describe(sp_sc) + ", SP " + describe(sp) + ", RAND " + describe(rnd)};
}

// Shared synthetic corpora and experiment runs for the ordering criteria.
class Lab {
 public:
  explicit Lab(fs::path dir) : dir_(std::move(dir)) {}

  const CorpusFiles& corpus(const std::string& name, const SynthSpec& spec) {
    auto it = corpora_.find(name);
    if (it != corpora_.end()) return it->second;
    CorpusOptions opt;
    opt.write_audio = false;
    return corpora_.emplace(name, write_corpus(synth_dataset(spec), dir_ / name, opt)).first->second;
  }

  ExperimentConfig config(const CorpusFiles& files, SystemKind system, const fs::path& embeddings,
                          const FoldCriterion& criterion) const {
    ExperimentConfig cfg;
    cfg.system = system;
    cfg.model = ModelConfig::for_variant(SizeVariant::kSmall);
    cfg.epochs = 10;
    cfg.seeds = {0, 1, 2, 3, 4};
    cfg.criterion = criterion;
    cfg.paths.manifest = files.manifest;
    cfg.paths.features = files.features;
    cfg.paths.embeddings = embeddings;
    cfg.paths.output_dir = dir_ / "runs";
    return cfg;
  }

  RunRecord run(const ExperimentConfig& cfg) {
    const auto key = config_hash(cfg);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    Experiment exp(cfg);
    return runs_.emplace(key, exp.run()).first->second;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, CorpusFiles> corpora_;
  std::map<std::string, RunRecord> runs_;
};

SynthSpec bimodal_spec() {
  SynthSpec spec;
  spec.n_utts = 2000;
  spec.audio_informativeness = 0.7;
  spec.text_informativeness = 0.7;
  return spec;
}

Outcome fusion_ordering(Lab& lab) {
  const Stopwatch clock;
  const auto& files = lab.corpus("bimodal", bimodal_spec());
  const auto sc = FoldCriterion::sp_sc("script03");
  const double audio = lab.run(lab.config(files, SystemKind::kAudioOnly, files.static_embeddings, sc)).aggregate.auc.median;
  const double text = lab.run(lab.config(files, SystemKind::kTextOnly, files.static_embeddings, sc)).aggregate.auc.median;
  const double ef = lab.run(lab.config(files, SystemKind::kEfCs, files.static_embeddings, sc)).aggregate.auc.median;
  const double secs = clock.seconds();
  const double margin = ef - std::max(audio, text);
  return {margin >= 0.02 && secs < 600.0,
          fmt("median AvAUC audio %.4f text %.4f ef_cs %.4f, margin %+.4f [%.0f s]", audio, text, ef, margin, secs)};
}

Outcome contextual_ordering(Lab& lab) {
  auto spec = bimodal_spec();
  spec.negation_rate = 0.5;
  const auto& files = lab.corpus("negation", spec);
  const auto sc = FoldCriterion::sp_sc("script03");
  const double stat = lab.run(lab.config(files, SystemKind::kTextOnly, files.static_embeddings, sc)).aggregate.auc.median;
  const double ctx =
      lab.run(lab.config(files, SystemKind::kTextOnly, files.contextual_embeddings, sc)).aggregate.auc.median;
  return {ctx - stat >= 0.05, fmt("median AvAUC static %.4f contextual %.4f, gain %+.4f", stat, ctx, ctx - stat)};
}

Outcome leakage_inflation(Lab& lab) {
  const auto& files = lab.corpus("bimodal", bimodal_spec());
  const double rnd =
      lab.run(lab.config(files, SystemKind::kTextOnly, files.static_embeddings, FoldCriterion::rand())).aggregate.auc.median;
  const double sc = lab.run(lab.config(files, SystemKind::kTextOnly, files.static_embeddings,
                                       FoldCriterion::sp_sc("script03")))
                        .aggregate.auc.median;
  return {rnd - sc >= 0.03, fmt("text median merged AvAUC RAND %.4f SP_SC %.4f, inflation %+.4f", rnd, sc, rnd - sc)};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = io::read_text_file(e.path());
  return out;
}

Outcome determinism(Lab& lab) {
  SynthSpec spec;
  spec.n_utts = 240;
  spec.lines_per_script = 8;
  spec.min_duration = 0.3;
  spec.max_duration = 0.4;
  const auto& files = lab.corpus("determinism", spec);
  auto run_with = [&](std::size_t workers, const std::string& out) {
    std::vector<RunRecord> records;
    for (SystemKind kind : {SystemKind::kEfCs, SystemKind::kLfPt}) {
      auto cfg = lab.config(files, kind, files.static_embeddings, FoldCriterion::sp());
      cfg.model.text = {8, 8, 3};
      cfg.model.audio = {8, 9};
      cfg.model.ef_hidden = 8;
      cfg.epochs = 2;
      cfg.seeds = {0, 1, 2};
      cfg.workers = workers;
      cfg.paths.output_dir = lab.dir() / out / "runs";
      records.push_back(Experiment(cfg).run());
    }
    write_report(records, lab.dir() / out / "report");
    return std::pair{read_tree(lab.dir() / out / "report"), read_tree(lab.dir() / out / "runs")};
  };
  const auto a = run_with(1, "det-a");
  const auto b = run_with(3, "det-b");
  const bool reports_equal = a.first == b.first && !a.first.empty();
  // Run directories hold the same files; record.json and predictions match.
  std::size_t compared = 0, differing = 0;
  for (const auto& [name, bytes] : a.second) {
    if (name.find("record.json") == std::string::npos && name.find("predictions.jsonl") == std::string::npos)
      continue;
    ++compared;
    auto it = b.second.find(name);
    if (it == b.second.end() || it->second != bytes) ++differing;
  }
  return {reports_equal && differing == 0 && compared > 0,
          fmt("%zu report files %s; %zu/%zu record and prediction files identical (workers 1 vs 3)", a.first.size(),
              reports_equal ? "byte-identical" : "differ", compared - differing, compared)};
}

std::vector<float> tone(double hz, double seconds, double amp = 0.5) {
  std::vector<float> s(static_cast<std::size_t>(seconds * dsp::kSupportedSampleRate));
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / dsp::kSupportedSampleRate));
  return s;
}

Outcome dsp_sanity() {
  const auto frames = dsp::extract_lld(tone(440.0, 1.0), {});
  std::vector<double> pitch;
  double max_jitter = 0.0, max_shimmer = 0.0;
  for (const auto& f : frames) {
    pitch.push_back(f.pitch_hz);
    max_jitter = std::max(max_jitter, std::abs(f.jitter));
    max_shimmer = std::max(max_shimmer, std::abs(f.shimmer));
  }
  const double median = quantile(pitch, 0.5);

  const std::vector<float> constant(16000, 0.25f);
  const auto lld = dsp::to_matrix(dsp::extract_lld(constant, {}));
  const auto stats = dsp::fit_norm_stats(std::span(&lld, 1));
  const auto feat = dsp::finalize_features(lld, stats);
  std::size_t nonzero_deltas = 0;
  for (std::size_t t = 0; t < feat.steps; ++t)
    for (std::size_t d = dsp::kLldDim; d < dsp::kFeatureDim; ++d) nonzero_deltas += feat.at(t, d) != 0.0;

  const bool pass = frames.size() == 97 && std::abs(median - 440.0) <= 5.0 && max_jitter == 0.0 &&
                    max_shimmer == 0.0 && nonzero_deltas == 0 && feat.steps == 97;
  return {pass, fmt("%zu frames, median pitch %.2f Hz, max jitter %g, max shimmer %g, nonzero deltas on constant "
                    "input %zu",
                    frames.size(), median, max_jitter, max_shimmer, nonzero_deltas)};
}

ScoredPrediction pred(const char* id, std::array<double, kNumClasses> probs, int label) {
  ScoredPrediction p;
  p.id = id;
  p.probs = probs;
  p.label = static_cast<Emotion>(label);
  return p;
}

Outcome metric_conventions() {
  // class counts {2,2,2,2}, correct {2,1,0,2}
  const std::vector<ScoredPrediction> p = {
      pred("a", {.7, .1, .1, .1}, 0), pred("b", {.6, .2, .1, .1}, 0), pred("c", {.1, .7, .1, .1}, 1),
      pred("d", {.7, .1, .1, .1}, 1), pred("e", {.1, .1, .1, .7}, 2), pred("f", {.1, .7, .1, .1}, 2),
      pred("g", {.1, .1, .1, .7}, 3), pred("h", {.2, .2, .1, .5}, 3)};
  const auto r = recall_metrics(p);
  const bool recall_ok = r.recall == std::array<double, 4>{1.0, 0.5, 0.0, 1.0} && r.av_rec == 0.625;
  const double auc = pair_auc({0.8, 0.4}, {0.6, 0.2});
  const bool auc_ok = auc == 0.75 && pair_auc({0.5}, {0.5}) == 0.5 && pair_auc({0.9, 0.8}, {0.2, 0.1}) == 1.0;
  return {recall_ok && auc_ok, fmt("recalls {%g, %g, %g, %g} av_rec %g; AUC %g", r.recall[0], r.recall[1],
                                   r.recall[2], r.recall[3], r.av_rec, auc)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance checks");
  std::string workdir;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory (its 'session' subdirectory is recreated)")->required();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path session = fs::path(workdir) / "session";
  fs::remove_all(session);
  fs::create_directories(session);
  Lab lab(session);

  const std::vector<std::function<Outcome()>> criteria = {
      gradient_correctness,
      auc_oracle,
      masking_invariance,
      freeze_contracts,
      lr_schedule,
      fold_leakage,
      [&] { return fusion_ordering(lab); },
      [&] { return contextual_ordering(lab); },
      [&] { return leakage_inflation(lab); },
      [&] { return determinism(lab); },
      dsp_sanity,
      metric_conventions,
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome out;
    try {
      out = criteria[i]();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failures += !out.pass;
    std::printf("criterion %2d: %s  %s\n", n, out.pass ? "PASS" : "FAIL", out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
