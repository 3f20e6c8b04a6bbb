#include "ser/dsp.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ser/binary_io.h"
#include "ser/error.h"

namespace ser::dsp {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double rms(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// Hann-weighted RMS; the taper suppresses the dependence on where the frame
// boundaries fall within a period.
double tapered_rms(std::span<const double> x) {
  const std::size_t n = x.size();
  double acc = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                          static_cast<double>(n));
    acc += w * x[i] * x[i];
    wsum += w;
  }
  return std::sqrt(acc / wsum);
}

double relative_change(double a, double b) {
  const double mean = 0.5 * (a + b);
  if (mean <= 0.0) return 0.0;
  const double rel = std::abs(a - b) / mean;
  return rel < kPerturbationResolution ? 0.0 : rel;
}

}  // namespace

std::size_t FrameSpec::window_samples() const {
  return static_cast<std::size_t>(std::lround(window_len * sample_rate));
}

std::size_t FrameSpec::hop_samples() const {
  return static_cast<std::size_t>(std::lround(hop_len * sample_rate));
}

void FrameSpec::validate() const {
  if (sample_rate <= 0) throw Error("sample rate must be positive");
  if (hop_samples() == 0) throw Error("hop length must be at least one sample");
  if (hop_len > window_len) throw Error("hop length exceeds window length");
  if (window_samples() < 64) throw Error("analysis window shorter than 64 samples");
}

std::size_t frame_count(std::size_t n_samples, const FrameSpec& spec) {
  spec.validate();
  const std::size_t win = spec.window_samples();
  if (n_samples < win) {
    throw Error("signal of " + std::to_string(n_samples) + " samples is shorter than one window of " +
                std::to_string(win));
  }
  return (n_samples - win) / spec.hop_samples() + 1;
}

std::vector<std::vector<double>> frame_signal(std::span<const float> samples, const FrameSpec& spec) {
  const std::size_t count = frame_count(samples.size(), spec);
  const std::size_t win = spec.window_samples();
  const std::size_t hop = spec.hop_samples();
  std::vector<std::vector<double>> frames(count);
  for (std::size_t f = 0; f < count; ++f) {
    frames[f].assign(samples.begin() + static_cast<std::ptrdiff_t>(f * hop),
                     samples.begin() + static_cast<std::ptrdiff_t>(f * hop + win));
  }
  return frames;
}

std::array<double, kLldDim> LldFrame::to_array() const {
  std::array<double, kLldDim> out{};
  std::copy(mfcc.begin(), mfcc.end(), out.begin());
  out[13] = pitch_hz;
  out[14] = jitter;
  out[15] = shimmer;
  out[16] = log_hnr;
  out[17] = loudness;
  return out;
}

void fft(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw Error("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = data[i + k];
        const auto v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

MfccExtractor::MfccExtractor(int sample_rate, std::size_t frame_len)
    : frame_len_(frame_len), fft_len_(next_pow2(frame_len)) {
  window_.resize(frame_len_);
  for (std::size_t i = 0; i < frame_len_; ++i) {
    window_[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                        static_cast<double>(frame_len_ - 1));
  }

  const std::size_t n_bins = fft_len_ / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(kNumMelFilters + 2);
  for (int i = 0; i < kNumMelFilters + 2; ++i) {
    edges[i] = mel_to_hz(mel_max * i / (kNumMelFilters + 1));
  }
  filters_.assign(kNumMelFilters, std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < kNumMelFilters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_len_);
      if (f > lo && f < mid) {
        filters_[m][k] = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        filters_[m][k] = (hi - f) / (hi - mid);
      }
    }
  }

  dct_.assign(kNumMfcc, std::vector<double>(kNumMelFilters));
  const double scale = std::sqrt(2.0 / kNumMelFilters);
  for (int n = 0; n < kNumMfcc; ++n) {
    for (int m = 0; m < kNumMelFilters; ++m) {
      dct_[n][m] = scale * std::cos(std::numbers::pi * n * (m + 0.5) / kNumMelFilters);
    }
  }
}

std::array<double, kNumMfcc> MfccExtractor::compute(std::span<const double> frame) const {
  if (frame.size() != frame_len_) throw Error("mfcc frame length mismatch");
  std::vector<std::complex<double>> spec(fft_len_);
  for (std::size_t i = 0; i < frame_len_; ++i) spec[i] = frame[i] * window_[i];
  fft(spec);

  const std::size_t n_bins = fft_len_ / 2 + 1;
  std::vector<double> power(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(spec[k]);

  std::array<double, kNumMelFilters> log_energy{};
  for (int m = 0; m < kNumMelFilters; ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) e += filters_[m][k] * power[k];
    log_energy[m] = std::log(std::max(e, 1e-10));
  }
  std::array<double, kNumMfcc> out{};
  for (int n = 0; n < kNumMfcc; ++n) {
    double acc = 0.0;
    for (int m = 0; m < kNumMelFilters; ++m) acc += dct_[n][m] * log_energy[m];
    out[n] = acc;
  }
  return out;
}

PitchEstimate estimate_pitch(std::span<const double> frame, int sample_rate) {
  PitchEstimate est;
  const std::size_t n = frame.size();
  const auto lag_min = static_cast<std::size_t>(std::floor(sample_rate / kMaxPitchHz));
  const auto lag_max = static_cast<std::size_t>(std::ceil(sample_rate / kMinPitchHz));
  if (lag_max + 2 >= n || lag_min < 2) return est;

  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = frame[i] - mean;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
  if (prefix[n] <= 1e-12 * static_cast<double>(n)) return est;

  // r[tau] for tau in [lag_min - 1, lag_max + 1].
  const std::size_t lo = lag_min - 1;
  const std::size_t hi = lag_max + 1;
  std::vector<double> r(hi + 1, 0.0);
  for (std::size_t tau = lo; tau <= hi; ++tau) {
    double acc = 0.0;
    for (std::size_t t = 0; t + tau < n; ++t) acc += x[t] * x[t + tau];
    const double e_head = prefix[n - tau];
    const double e_tail = prefix[n] - prefix[tau];
    const double denom = std::sqrt(e_head * e_tail);
    r[tau] = denom > 0.0 ? acc / denom : 0.0;
  }

  double best = -1.0;
  for (std::size_t tau = lag_min; tau <= lag_max; ++tau) {
    if (r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1]) best = std::max(best, r[tau]);
  }
  if (best < kVoicingThreshold) return est;

  std::size_t lag = 0;
  for (std::size_t tau = lag_min; tau <= lag_max; ++tau) {
    if (r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1] && r[tau] >= best - kPeakTieTolerance) {
      lag = tau;
      break;
    }
  }

  const double left = r[lag - 1], centre = r[lag], right = r[lag + 1];
  const double curvature = left - 2.0 * centre + right;
  double delta = 0.0;
  if (curvature < 0.0) delta = std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
  const double peak = centre - 0.25 * (left - right) * delta;

  est.voiced = true;
  est.period_samples = static_cast<double>(lag) + delta;
  est.f0_hz = sample_rate / est.period_samples;
  est.peak = std::min(peak, 1.0);
  return est;
}

double log_hnr_from_peak(double r) {
  if (r <= 0.0) return -kHnrClampDb;
  if (r >= 1.0) return kHnrClampDb;
  return std::clamp(10.0 * std::log10(r / (1.0 - r)), -kHnrClampDb, kHnrClampDb);
}

std::vector<LldFrame> extract_lld(std::span<const float> samples, const FrameSpec& spec) {
  if (spec.sample_rate != kSupportedSampleRate) {
    throw Error("unsupported sample rate " + std::to_string(spec.sample_rate) + " (expected " +
                std::to_string(kSupportedSampleRate) + ")");
  }
  const auto frames = frame_signal(samples, spec);
  const MfccExtractor mfcc(spec.sample_rate, spec.window_samples());

  std::vector<LldFrame> out(frames.size());
  double prev_period = 0.0;
  double prev_amp = 0.0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& frame = frames[f];
    LldFrame& lld = out[f];
    lld.mfcc = mfcc.compute(frame);
    const double frame_rms = rms(frame);
    lld.loudness = std::pow(frame_rms, 0.3);

    const PitchEstimate pitch = estimate_pitch(frame, spec.sample_rate);
    if (!pitch.voiced) {
      prev_period = 0.0;
      prev_amp = 0.0;
      continue;
    }
    lld.pitch_hz = pitch.f0_hz;
    lld.log_hnr = log_hnr_from_peak(pitch.peak);
    const double amp = tapered_rms(frame);
    if (prev_period > 0.0) {
      lld.jitter = relative_change(pitch.period_samples, prev_period);
      lld.shimmer = relative_change(amp, prev_amp);
    }
    prev_period = pitch.period_samples;
    prev_amp = amp;
  }
  return out;
}

LldMatrix to_matrix(const std::vector<LldFrame>& frames) {
  LldMatrix m;
  m.reserve(frames.size());
  for (const auto& f : frames) m.push_back(f.to_array());
  return m;
}

NormStats fit_norm_stats(std::span<const LldMatrix> train_sequences) {
  std::size_t total = 0;
  for (const auto& s : train_sequences) total += s.size();
  if (total == 0) throw Error("cannot fit normalization statistics on an empty pool");

  // Per-sequence partial sums are order independent; summing them in sorted
  // order makes the pooled reduction independent of sequence order too.
  auto pooled = [&](auto&& per_sequence) {
    std::array<double, kLldDim> out{};
    std::vector<double> partial(train_sequences.size());
    for (int d = 0; d < kLldDim; ++d) {
      for (std::size_t i = 0; i < train_sequences.size(); ++i) partial[i] = per_sequence(train_sequences[i], d);
      std::sort(partial.begin(), partial.end());
      double acc = 0.0;
      for (double p : partial) acc += p;
      out[d] = acc;
    }
    return out;
  };

  NormStats stats;
  const auto sums = pooled([](const LldMatrix& s, int d) {
    double acc = 0.0;
    for (const auto& row : s) acc += row[d];
    return acc;
  });
  for (int d = 0; d < kLldDim; ++d) stats.mean[d] = sums[d] / static_cast<double>(total);
  const auto sq = pooled([&](const LldMatrix& s, int d) {
    double acc = 0.0;
    for (const auto& row : s) {
      const double c = row[d] - stats.mean[d];
      acc += c * c;
    }
    return acc;
  });
  for (int d = 0; d < kLldDim; ++d) {
    stats.std[d] = std::max(std::sqrt(sq[d] / static_cast<double>(total)), kStdFloor);
  }
  return stats;
}

FeatureSequence finalize_features(const LldMatrix& seq, const NormStats& stats, std::string id) {
  if (seq.empty()) throw Error("cannot finalize an empty feature sequence");
  FeatureSequence out;
  out.id = std::move(id);
  out.steps = seq.size();
  out.values.assign(out.steps * kFeatureDim, 0.0);
  for (std::size_t t = 0; t < out.steps; ++t) {
    double* row = out.values.data() + t * kFeatureDim;
    for (int d = 0; d < kLldDim; ++d) row[d] = (seq[t][d] - stats.mean[d]) / stats.std[d];
    if (t > 0) {
      const double* prev = row - kFeatureDim;
      for (int d = 0; d < kLldDim; ++d) row[kLldDim + d] = row[d] - prev[d];
    }
  }
  return out;
}

void write_lld_cache(const std::filesystem::path& path, const std::map<std::string, LldMatrix>& seqs) {
  std::vector<io::MatrixRecord> records;
  records.reserve(seqs.size());
  for (const auto& [id, seq] : seqs) {
    io::MatrixRecord rec{id, static_cast<std::uint32_t>(seq.size()), kLldDim, {}};
    rec.values.reserve(seq.size() * kLldDim);
    for (const auto& row : seq) {
      for (double v : row) rec.values.push_back(static_cast<float>(v));
    }
    records.push_back(std::move(rec));
  }
  io::write_matrix_file(path, records);
}

std::map<std::string, LldMatrix> read_lld_cache(const std::filesystem::path& path) {
  std::map<std::string, LldMatrix> out;
  for (auto& rec : io::read_matrix_file(path)) {
    if (rec.cols != kLldDim) {
      throw Error("raw feature record '" + rec.id + "' has " + std::to_string(rec.cols) + " columns, expected 18");
    }
    if (rec.rows == 0) throw Error("raw feature record '" + rec.id + "' is empty");
    LldMatrix m(rec.rows);
    for (std::size_t t = 0; t < rec.rows; ++t) {
      for (int d = 0; d < kLldDim; ++d) m[t][d] = rec.values[t * kLldDim + d];
    }
    if (!out.emplace(rec.id, std::move(m)).second) throw Error("duplicate feature record '" + rec.id + "'");
  }
  return out;
}

void write_feature_cache(const std::filesystem::path& path, std::span<const FeatureSequence> seqs) {
  std::vector<io::MatrixRecord> records;
  records.reserve(seqs.size());
  for (const auto& s : seqs) {
    io::MatrixRecord rec{s.id, static_cast<std::uint32_t>(s.steps), kFeatureDim, {}};
    rec.values.assign(s.values.begin(), s.values.end());
    records.push_back(std::move(rec));
  }
  io::write_matrix_file(path, records);
}

std::vector<FeatureSequence> read_feature_cache(const std::filesystem::path& path) {
  std::vector<FeatureSequence> out;
  for (auto& rec : io::read_matrix_file(path)) {
    if (rec.cols != kFeatureDim) {
      throw Error("feature record '" + rec.id + "' has " + std::to_string(rec.cols) + " columns, expected 36");
    }
    if (rec.rows == 0) throw Error("feature record '" + rec.id + "' is empty");
    FeatureSequence s;
    s.id = rec.id;
    s.steps = rec.rows;
    s.values.assign(rec.values.begin(), rec.values.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ser::dsp
