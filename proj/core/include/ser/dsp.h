#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ser::dsp {

inline constexpr int kSupportedSampleRate = 16000;
inline constexpr int kNumMfcc = 13;
inline constexpr int kNumMelFilters = 26;
inline constexpr int kLldDim = 18;
inline constexpr int kFeatureDim = 2 * kLldDim;

inline constexpr double kMinPitchHz = 60.0;
inline constexpr double kMaxPitchHz = 500.0;
inline constexpr double kVoicingThreshold = 0.45;
/// Local autocorrelation peaks within this distance of the global maximum
/// are ties; the lowest lag among them wins. Keeps pure tones off their
/// subharmonics.
inline constexpr double kPeakTieTolerance = 0.01;
inline constexpr double kHnrClampDb = 60.0;
/// Relative frame-to-frame period/amplitude changes below this resolution
/// are reported as zero jitter/shimmer.
inline constexpr double kPerturbationResolution = 1e-4;
inline constexpr double kStdFloor = 1e-6;

struct FrameSpec {
  int sample_rate = kSupportedSampleRate;
  double window_len = 0.032;  // seconds
  double hop_len = 0.010;     // seconds

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  /// Throws ser::Error unless hop <= window and the window spans at least
  /// 64 samples.
  void validate() const;
};

/// floor((n - win) / hop) + 1. Throws if n < win.
std::size_t frame_count(std::size_t n_samples, const FrameSpec& spec);

/// Contiguous, unpadded analysis frames.
std::vector<std::vector<double>> frame_signal(std::span<const float> samples, const FrameSpec& spec);

struct LldFrame {
  std::array<double, kNumMfcc> mfcc{};
  double pitch_hz = 0.0;  // 0 on unvoiced frames
  double jitter = 0.0;
  double shimmer = 0.0;
  double log_hnr = -kHnrClampDb;
  double loudness = 0.0;

  bool voiced() const { return pitch_hz > 0.0; }
  /// Layout: mfcc[0..12], pitch, jitter, shimmer, log_hnr, loudness.
  std::array<double, kLldDim> to_array() const;
};

using LldMatrix = std::vector<std::array<double, kLldDim>>;

/// Per-frame descriptors. Only kSupportedSampleRate input is accepted.
std::vector<LldFrame> extract_lld(std::span<const float> samples, const FrameSpec& spec);
LldMatrix to_matrix(const std::vector<LldFrame>& frames);

struct PitchEstimate {
  bool voiced = false;
  double f0_hz = 0.0;
  double period_samples = 0.0;  // interpolated lag
  double peak = 0.0;            // normalized autocorrelation at the lag
};

/// Normalized-autocorrelation pitch detector on one frame.
PitchEstimate estimate_pitch(std::span<const double> frame, int sample_rate);

/// Harmonics-to-noise ratio in dB from a normalized autocorrelation peak,
/// clamped to +/- kHnrClampDb.
double log_hnr_from_peak(double r);

/// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

/// Hamming-windowed power spectrum -> mel filterbank -> log -> DCT-II.
class MfccExtractor {
 public:
  MfccExtractor(int sample_rate, std::size_t frame_len);
  std::array<double, kNumMfcc> compute(std::span<const double> frame) const;
  const std::vector<std::vector<double>>& filterbank() const { return filters_; }

 private:
  std::size_t frame_len_;
  std::size_t fft_len_;
  std::vector<double> window_;
  std::vector<std::vector<double>> filters_;  // kNumMelFilters x (fft_len/2 + 1)
  std::vector<std::vector<double>> dct_;      // kNumMfcc x kNumMelFilters
};

struct NormStats {
  std::array<double, kLldDim> mean{};
  std::array<double, kLldDim> std{};
};

/// Pooled per-dimension mean and population std over every frame of every
/// sequence, std floored at kStdFloor. The result does not depend on the
/// order of the sequences.
NormStats fit_norm_stats(std::span<const LldMatrix> train_sequences);

struct FeatureSequence {
  std::string id;
  std::size_t steps = 0;
  std::vector<double> values;  // steps x kFeatureDim, row-major

  double at(std::size_t t, std::size_t d) const { return values[t * kFeatureDim + d]; }
};

/// Normalizes each frame and appends first-order differences (zero for the
/// first frame), giving kFeatureDim columns.
FeatureSequence finalize_features(const LldMatrix& seq, const NormStats& stats, std::string id = {});

/// Feature caches share the matrix-record layout; raw caches have 18
/// columns, finalized caches 36.
void write_lld_cache(const std::filesystem::path& path, const std::map<std::string, LldMatrix>& seqs);
std::map<std::string, LldMatrix> read_lld_cache(const std::filesystem::path& path);
void write_feature_cache(const std::filesystem::path& path, std::span<const FeatureSequence> seqs);
std::vector<FeatureSequence> read_feature_cache(const std::filesystem::path& path);

}  // namespace ser::dsp
