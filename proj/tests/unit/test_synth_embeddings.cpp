#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ser/dsp.h"
#include "ser/embeddings.h"
#include "ser/error.h"
#include "ser/synth.h"
#include "support.h"

namespace ser {
namespace {

double dot(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

TEST(Synth, Deterministic) {
  SynthSpec spec;
  spec.n_utts = 120;
  spec.negation_rate = 0.3;
  const auto a = synth_dataset(spec);
  const auto b = synth_dataset(spec);
  EXPECT_EQ(serialize_manifest(a.manifest), serialize_manifest(b.manifest));
  EXPECT_EQ(a.tokens, b.tokens);
  ASSERT_EQ(a.waveforms.size(), b.waveforms.size());
  for (std::size_t i = 0; i < a.waveforms.size(); ++i) EXPECT_EQ(a.waveforms[i].samples, b.waveforms[i].samples);
  spec.seed = 1;
  EXPECT_NE(synth_dataset(spec).tokens, a.tokens);
}

TEST(Synth, GroupingGrid) {
  SynthSpec spec;
  spec.n_utts = 400;
  const auto ds = synth_dataset(spec);
  std::set<std::string> speakers, sessions, scripts;
  for (const auto& r : ds.manifest.records) {
    speakers.insert(r.speaker_id);
    sessions.insert(r.session_id);
    scripts.insert(r.script_id);
  }
  EXPECT_EQ(speakers.size(), 10u);
  EXPECT_EQ(sessions.size(), 5u);
  EXPECT_EQ(scripts.size(), spec.n_scripts + 1);  // plus improv
  EXPECT_TRUE(scripts.count("improv"));
}

TEST(Synth, InfeasibleSpecs) {
  SynthSpec spec;
  spec.n_speakers = 4;
  EXPECT_THROW(synth_dataset(spec), Error);  // 2 sessions < 5 folds
  spec = {};
  spec.text_informativeness = 1.5;
  EXPECT_THROW(synth_dataset(spec), Error);
  spec = {};
  spec.n_utts = 10;
  EXPECT_THROW(synth_dataset(spec), Error);
}

// Nearest class F0 of the measured median pitch: an oracle reading only the
// waveform.
Emotion pitch_oracle(const Waveform& w) {
  const auto frames = dsp::extract_lld(w.samples, {});
  std::vector<double> f0;
  for (const auto& f : frames)
    if (f.voiced()) f0.push_back(f.pitch_hz);
  std::nth_element(f0.begin(), f0.begin() + static_cast<std::ptrdiff_t>(f0.size() / 2), f0.end());
  const double med = f0.empty() ? 0.0 : f0[f0.size() / 2];
  // Class F0 centres happy 230, sad 140, angry 290, neutral 180 (speaker
  // factors in [0.85, 1.15]); loudness separates the overlapping pairs.
  double rms = 0.0;
  for (float s : w.samples) rms += static_cast<double>(s) * s;
  rms = std::sqrt(rms / static_cast<double>(w.samples.size()));
  if (med < 160.0) return Emotion::kSad;
  if (rms > 0.25) return Emotion::kAngry;
  if (rms > 0.14) return Emotion::kHappy;
  return med > 200.0 ? Emotion::kHappy : Emotion::kNeutral;
}

TEST(Synth, AudioOnlyInformativeCorpus) {
  SynthSpec spec;
  spec.n_utts = 200;
  spec.audio_informativeness = 1.0;
  spec.text_informativeness = 0.0;
  const auto ds = synth_dataset(spec);
  std::size_t audio_hits = 0, text_hits = 0;
  for (std::size_t i = 0; i < ds.manifest.records.size(); ++i) {
    const auto label = ds.manifest.records[i].label;
    EXPECT_EQ(ds.acoustic_class[i], label);
    audio_hits += pitch_oracle(ds.waveforms[i]) == label;
    text_hits += ds.lexical_class[i] == label;
  }
  const double n = static_cast<double>(ds.manifest.records.size());
  EXPECT_GT(audio_hits / n, 0.6);
  EXPECT_NEAR(text_hits / n, 0.25, 0.1);
}

Emotion keyword_class(const std::vector<std::string>& words) {
  for (const auto& w : words)
    for (Emotion e : kAllEmotions)
      for (const auto& k : class_keywords(e))
        if (w == k) return e;
  ADD_FAILURE() << "no keyword";
  return Emotion::kNeutral;
}

TEST(Synth, NegationDecouplesTokenIdentityFromMeaning) {
  SynthSpec spec;
  spec.n_utts = 400;
  spec.negation_rate = 0.0;
  auto ds = synth_dataset(spec);
  for (std::size_t i = 0; i < ds.tokens.size(); ++i) EXPECT_EQ(keyword_class(ds.tokens[i]), ds.lexical_class[i]);

  spec.negation_rate = 0.5;
  ds = synth_dataset(spec);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < ds.tokens.size(); ++i) agree += keyword_class(ds.tokens[i]) == ds.lexical_class[i];
  const double frac = static_cast<double>(agree) / static_cast<double>(ds.tokens.size());
  EXPECT_GT(frac, 0.3);
  EXPECT_LT(frac, 0.7);
}

TEST(Synth, NegateIsAnInvolution) {
  for (Emotion e : kAllEmotions) {
    EXPECT_NE(negate(e), e);
    EXPECT_EQ(negate(negate(e)), e);
  }
}

TEST(Synth, WriteCorpusProducesLoadableFiles) {
  SynthSpec spec;
  spec.n_utts = 60;
  spec.n_scripts = 1;
  spec.lines_per_script = 4;
  const auto ds = synth_dataset(spec);
  testing::TempDir dir("corpus");
  CorpusOptions opt;
  opt.embedding_dim = 8;
  opt.write_audio = false;
  const auto files = write_corpus(ds, dir.path(), opt);
  EXPECT_EQ(load_manifest(files.manifest).records.size(), 60u);
  EXPECT_EQ(load_embeddings(files.static_embeddings, 8).size(), 60u);
  EXPECT_EQ(load_embeddings(files.contextual_embeddings, 8).size(), 60u);
  EXPECT_EQ(embedding_dim_of(files.static_embeddings), 8u);
  const auto lld = dsp::read_lld_cache(files.features);
  EXPECT_EQ(lld.size(), 60u);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "wav"));
}

TEST(PseudoStatic, ContextFreeUnitVectors) {
  const auto a = pseudo_static_embeddings({"i", "am", "sad"}, 16, 3);
  const auto b = pseudo_static_embeddings({"sad", "not", "x", "y"}, 16, 3);
  EXPECT_EQ(std::vector<float>(a.row(2), a.row(2) + 16), std::vector<float>(b.row(0), b.row(0) + 16));
  for (std::size_t t = 0; t < a.steps; ++t) EXPECT_NEAR(dot(a.row(t), a.row(t), 16), 1.0, 1e-6);
  EXPECT_THROW(pseudo_static_embeddings({}, 16, 3), Error);
  EXPECT_THROW(pseudo_static_embeddings({"a"}, 0, 3), Error);
}

TEST(PseudoStatic, DistinctTokensNearlyOrthogonal) {
  std::size_t small = 0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    const auto e = pseudo_static_embeddings({"tok" + std::to_string(2 * i), "tok" + std::to_string(2 * i + 1)}, 64, 0);
    small += std::abs(dot(e.row(0), e.row(1), 64)) < 0.5;
  }
  EXPECT_GE(small, 990u);
}

TEST(PseudoContextual, NegationShiftsTheVector) {
  const auto plain = pseudo_contextual_embeddings({"i", "am", "sad"}, 32, 1);
  const auto neg = pseudo_contextual_embeddings({"i", "am", "not", "sad"}, 32, 1);
  double dist = 0.0;
  for (std::size_t d = 0; d < 32; ++d) dist += std::pow(plain.row(2)[d] - neg.row(3)[d], 2);
  EXPECT_GT(std::sqrt(dist), 0.5);
  EXPECT_TRUE(is_negation_cue("not"));
  EXPECT_FALSE(is_negation_cue("sad"));
}

TEST(PseudoContextual, SingleTokenIsAnOrthogonalTransformOfStatic) {
  const std::vector<std::string> toks = {"glad", "lonely", "table", "x"};
  std::vector<EmbeddingSequence> s, c;
  for (const auto& t : toks) {
    s.push_back(pseudo_static_embeddings({t}, 24, 5));
    c.push_back(pseudo_contextual_embeddings({t}, 24, 5));
  }
  for (std::size_t i = 0; i < toks.size(); ++i) {
    for (std::size_t j = 0; j < toks.size(); ++j) {
      EXPECT_NEAR(dot(c[i].row(0), c[j].row(0), 24), dot(s[i].row(0), s[j].row(0), 24), 1e-6);
    }
  }
  EXPECT_NE(std::vector<float>(c[0].values), std::vector<float>(s[0].values));
}

TEST(PseudoContextual, DependsOnlyOnTheWindow) {
  std::vector<std::string> toks = {"a", "b", "c", "d", "e", "f", "g", "h", "i"};
  const auto base = pseudo_contextual_embeddings(toks, 16, 2);
  std::swap(toks[0], toks[8]);
  toks[1] = "not";
  const auto moved = pseudo_contextual_embeddings(toks, 16, 2);
  for (std::size_t t = 4; t <= 5; ++t) {
    for (std::size_t d = 0; d < 16; ++d) EXPECT_EQ(base.row(t)[d], moved.row(t)[d]);
  }
  EXPECT_NE(std::vector<float>(base.row(2), base.row(2) + 16), std::vector<float>(moved.row(2), moved.row(2) + 16));
}

TEST(PseudoContextual, Reproducible) {
  const std::vector<std::string> toks = {"we", "are", "not", "glad"};
  EXPECT_EQ(pseudo_contextual_embeddings(toks, 16, 9).values, pseudo_contextual_embeddings(toks, 16, 9).values);
  EXPECT_NE(pseudo_contextual_embeddings(toks, 16, 9).values, pseudo_contextual_embeddings(toks, 16, 10).values);
}

TEST(EmbeddingStore, Contracts) {
  EmbeddingStore store(4);
  store.add(pseudo_static_embeddings({"a", "b"}, 4, 0, "u1"));
  EXPECT_THROW(store.add(pseudo_static_embeddings({"a"}, 4, 0, "u1")), Error);
  EXPECT_THROW(store.add(pseudo_static_embeddings({"a"}, 5, 0, "u2")), Error);
  EmbeddingSequence empty;
  empty.id = "u3";
  empty.dim = 4;
  EXPECT_THROW(store.add(empty), Error);
  EXPECT_THROW(store.at("nope"), Error);
  EXPECT_EQ(store.at("u1").steps, 2u);
}

TEST(EmbeddingStore, BinaryAndTextRoundTrip) {
  testing::TempDir dir("emb");
  EmbeddingStore store(3);
  store.add(pseudo_contextual_embeddings({"x", "not", "y"}, 3, 1, "u1"));
  store.add(pseudo_static_embeddings({"z"}, 3, 1, "u2"));
  save_embeddings(dir.path() / "e.bin", store);
  const auto back = load_embeddings(dir.path() / "e.bin", 3);
  EXPECT_EQ(back.at("u1").values, store.at("u1").values);
  EXPECT_THROW(load_embeddings(dir.path() / "e.bin", 4), Error);

  {
    std::ofstream os(dir.path() / "e.jsonl");
    os << R"({"id":"t1","vectors":[[1,2,3],[4,5,6]]})" << "\n" << R"({"id":"t2","vectors":[[0,0,1]]})" << "\n";
  }
  const auto text = load_embeddings(dir.path() / "e.jsonl", 3);
  EXPECT_EQ(text.at("t1").steps, 2u);
  EXPECT_FLOAT_EQ(text.at("t1").row(1)[2], 6.0f);
  {
    std::ofstream os(dir.path() / "bad.jsonl");
    os << R"({"id":"t1","vectors":[[1,2,3],[4,5]]})" << "\n";
  }
  EXPECT_THROW(load_embeddings(dir.path() / "bad.jsonl", 3), Error);
}

}  // namespace
}  // namespace ser
