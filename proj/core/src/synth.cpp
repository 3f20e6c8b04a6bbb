#include "ser/synth.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>
#include <map>

#include "ser/binary_io.h"
#include "ser/dsp.h"
#include "ser/embeddings.h"
#include "ser/error.h"
#include "ser/random.h"

namespace ser {

namespace {

constexpr std::array<double, kNumClasses> kClassF0 = {230.0, 140.0, 290.0, 180.0};
constexpr std::array<double, kNumClasses> kClassAmplitude = {0.45, 0.15, 0.8, 0.28};

const std::vector<std::string> kFillers = {
    "i",     "you",  "we",    "the",   "a",      "it",    "that",   "this",  "was",  "is",
    "am",    "are",  "just",  "really", "so",    "very",  "today",  "there", "here", "then",
    "with",  "about", "for",  "and",   "but",    "maybe", "think",  "know",  "said", "told",
    "going", "went", "again", "home",  "work",   "time",  "people", "thing", "well", "yeah"};

const std::array<std::vector<std::string>, kNumClasses> kKeywords = {{
    {"glad", "joy", "great", "love", "fun", "wonderful"},
    {"sad", "miss", "lonely", "cry", "lost", "sorry"},
    {"hate", "mad", "furious", "stupid", "annoying", "outrageous"},
    {"okay", "fine", "table", "monday", "report", "schedule"},
}};

std::string format_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02zu", prefix, n);
  return buf;
}

Emotion random_class(Rng& rng) { return emotion_from_index(static_cast<int>(rng.uniform_int(kNumClasses))); }

// Sentence expressing `expressed` (possibly via a negated opposite keyword).
std::vector<std::string> make_sentence(Rng& rng, Emotion expressed, double negation_rate) {
  const std::size_t n_fill = 4 + rng.uniform_int(4);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n_fill; ++i) words.push_back(kFillers[rng.uniform_int(kFillers.size())]);

  const bool negated = rng.bernoulli(negation_rate);
  const Emotion keyword_class = negated ? negate(expressed) : expressed;
  const auto& pool = kKeywords[index_of(keyword_class)];
  const std::string keyword = pool[rng.uniform_int(pool.size())];

  const std::size_t pos = rng.uniform_int(n_fill + 1);
  std::vector<std::string> phrase;
  if (negated) phrase.push_back(kNegationToken);
  phrase.push_back(keyword);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), phrase.begin(), phrase.end());

  // A distant negation that does not scope over the keyword.
  if (!negated && rng.bernoulli(0.5 * negation_rate)) {
    if (pos >= 3) {
      words.insert(words.begin(), kNegationToken);
    } else if (words.size() - pos > 3) {
      words.push_back(kNegationToken);
    }
  }
  return words;
}

std::vector<float> render_waveform(Rng& rng, Emotion acoustic, double speaker_factor, const SynthSpec& spec) {
  const double duration = rng.uniform(spec.min_duration, spec.max_duration);
  const auto n = static_cast<std::size_t>(duration * spec.sample_rate);
  const double f0 = kClassF0[index_of(acoustic)] * speaker_factor * (1.0 + 0.04 * rng.normal());
  const double amp = kClassAmplitude[index_of(acoustic)] * std::max(0.3, 1.0 + 0.15 * rng.normal());
  const double drift = 0.1 * rng.uniform(-1.0, 1.0);
  const double vibrato_rate = rng.uniform(3.0, 6.0);
  const double attack = 0.03 * spec.sample_rate;

  std::vector<float> out(n);
  std::array<double, 3> phase{};
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) / static_cast<double>(n);
    const double t = static_cast<double>(i) / spec.sample_rate;
    const double f = f0 * (1.0 + drift * (pos - 0.5)) *
                     (1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * vibrato_rate * t));
    double s = 0.0;
    double harmonic_amp = 1.0;
    for (std::size_t h = 0; h < phase.size(); ++h) {
      phase[h] += 2.0 * std::numbers::pi * f * static_cast<double>(h + 1) / spec.sample_rate;
      s += harmonic_amp * std::sin(phase[h]);
      harmonic_amp *= 0.6;
    }
    const double idx = static_cast<double>(i);
    const double envelope = std::min({1.0, idx / attack, (static_cast<double>(n) - idx) / attack});
    out[i] = static_cast<float>(0.55 * amp * envelope * s + 0.01 * rng.normal());
  }
  return out;
}

}  // namespace

const std::vector<std::string>& class_keywords(Emotion e) { return kKeywords[index_of(e)]; }

Emotion negate(Emotion e) {
  switch (e) {
    case Emotion::kHappy: return Emotion::kSad;
    case Emotion::kSad: return Emotion::kHappy;
    case Emotion::kAngry: return Emotion::kNeutral;
    case Emotion::kNeutral: return Emotion::kAngry;
  }
  return e;
}

SynthDataset synth_dataset(const SynthSpec& spec) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(spec.audio_informativeness) || !in_unit(spec.text_informativeness) || !in_unit(spec.negation_rate)) {
    throw Error("informativeness and negation rate must lie in [0, 1]");
  }
  if (spec.n_speakers == 0) throw Error("synthetic corpus needs at least one speaker");
  const std::size_t n_sessions = (spec.n_speakers + 1) / 2;
  if (n_sessions < spec.folds) {
    throw Error("infeasible synthetic spec: " + std::to_string(n_sessions) + " sessions cannot support " +
                std::to_string(spec.folds) + " folds");
  }
  const std::size_t groups = spec.n_scripts + 1;
  if (spec.n_utts < 4 * kNumClasses || spec.n_utts < spec.n_speakers * groups) {
    throw Error("infeasible synthetic spec: too few utterances for the speaker/script grid");
  }
  if (spec.n_scripts > 0 && spec.lines_per_script == 0) throw Error("scripts need at least one line");
  if (spec.min_duration <= 0.0 || spec.max_duration < spec.min_duration) throw Error("invalid duration range");

  // Scripted lines are fixed across sessions: same words, same label.
  struct Line {
    std::vector<std::string> words;
    Emotion label;
    Emotion lexical;
  };
  std::vector<std::vector<Line>> scripts(spec.n_scripts);
  for (std::size_t s = 0; s < spec.n_scripts; ++s) {
    for (std::size_t l = 0; l < spec.lines_per_script; ++l) {
      Rng line_rng(derive_seed(derive_seed(spec.seed, "script-line"), s * 1000003 + l));
      Line line;
      line.label = emotion_from_index(static_cast<int>((s + l) % kNumClasses));
      line.lexical = line_rng.bernoulli(spec.text_informativeness) ? line.label : random_class(line_rng);
      line.words = make_sentence(line_rng, line.lexical, spec.negation_rate);
      char tag[48];
      std::snprintf(tag, sizeof(tag), "s%02zul%02zu", s + 1, l);
      line.words.push_back(std::string(tag) + "a");
      line.words.insert(line.words.begin(), std::string(tag) + "b");
      scripts[s].push_back(std::move(line));
    }
  }

  std::vector<double> speaker_factor(spec.n_speakers);
  {
    Rng rng(derive_seed(spec.seed, "speakers"));
    for (auto& f : speaker_factor) f = rng.uniform(0.85, 1.15);
  }

  SynthDataset ds;
  ds.manifest.name = "synthetic";
  Rng rng(derive_seed(spec.seed, "utterances"));
  for (std::size_t u = 0; u < spec.n_utts; ++u) {
    const std::size_t speaker = u % spec.n_speakers;
    const std::size_t slot = (u / spec.n_speakers) % groups;
    const bool improv = slot == spec.n_scripts;

    UtteranceRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "utt%05zu", u);
    rec.id = id;
    rec.speaker_id = format_id("spk", speaker + 1);
    rec.session_id = format_id("ses", speaker / 2 + 1);

    std::vector<std::string> words;
    Emotion lexical;
    if (improv) {
      rec.script_id = std::string(kImprovScript);
      rec.label = random_class(rng);
      lexical = rng.bernoulli(spec.text_informativeness) ? rec.label : random_class(rng);
      words = make_sentence(rng, lexical, spec.negation_rate);
    } else {
      rec.script_id = format_id("script", slot + 1);
      const std::size_t line_idx = (u / (spec.n_speakers * groups)) % spec.lines_per_script;
      const Line& line = scripts[slot][line_idx];
      rec.label = line.label;
      words = line.words;
      lexical = line.lexical;
    }
    rec.raw_label = std::string(to_string(rec.label));
    rec.audio_ref = "wav/" + rec.id + ".wav";
    rec.text_ref = rec.id;

    const Emotion acoustic = rng.bernoulli(spec.audio_informativeness) ? rec.label : random_class(rng);
    Waveform wave;
    wave.sample_rate = spec.sample_rate;
    wave.samples = render_waveform(rng, acoustic, speaker_factor[speaker], spec);

    ds.manifest.records.push_back(std::move(rec));
    ds.waveforms.push_back(std::move(wave));
    ds.tokens.push_back(std::move(words));
    ds.acoustic_class.push_back(acoustic);
    ds.lexical_class.push_back(lexical);
  }
  return ds;
}

CorpusFiles write_corpus(const SynthDataset& data, const std::filesystem::path& dir, const CorpusOptions& options) {
  CorpusFiles files{dir / "manifest.jsonl", dir / "features.lld", dir / "embeddings_static.bin",
                    dir / "embeddings_contextual.bin", dir / "tokens.jsonl"};
  std::filesystem::create_directories(dir);
  save_manifest(data.manifest, files.manifest);

  EmbeddingStore stat(options.embedding_dim), ctx(options.embedding_dim);
  std::map<std::string, dsp::LldMatrix> lld;
  std::string tokens;
  const dsp::FrameSpec frames;
  for (std::size_t i = 0; i < data.manifest.records.size(); ++i) {
    const auto& rec = data.manifest.records[i];
    const auto& toks = data.tokens[i];
    stat.add(pseudo_static_embeddings(toks, options.embedding_dim, options.embedding_seed, rec.text_ref));
    ctx.add(pseudo_contextual_embeddings(toks, options.embedding_dim, options.embedding_seed, rec.text_ref));
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["tokens"] = toks;
    tokens += j.dump() + "\n";
    const auto& wave = data.waveforms[i];
    lld.emplace(rec.id, dsp::to_matrix(dsp::extract_lld(wave.samples, frames)));
    if (options.write_audio) write_wav(dir / rec.audio_ref, wave);
  }
  save_embeddings(files.static_embeddings, stat);
  save_embeddings(files.contextual_embeddings, ctx);
  dsp::write_lld_cache(files.features, lld);
  io::write_file_atomic(files.tokens, tokens);
  return files;
}

}  // namespace ser
