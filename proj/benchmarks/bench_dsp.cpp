#include <benchmark/benchmark.h>

#include <cmath>
#include <complex>
#include <vector>

#include "ser/dsp.h"
#include "ser/random.h"

namespace {

std::vector<float> voiced_noise(double seconds) {
  ser::Rng rng(1);
  std::vector<float> s(static_cast<std::size_t>(seconds * ser::dsp::kSupportedSampleRate));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = static_cast<double>(i) / ser::dsp::kSupportedSampleRate;
    s[i] = static_cast<float>(0.4 * std::sin(2.0 * M_PI * 180.0 * t) + 0.05 * rng.normal());
  }
  return s;
}

void BM_ExtractLld(benchmark::State& state) {
  const auto samples = voiced_noise(static_cast<double>(state.range(0)) / 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(ser::dsp::extract_lld(samples, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_ExtractLld)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Fft(benchmark::State& state) {
  std::vector<std::complex<double>> data(static_cast<std::size_t>(state.range(0)));
  ser::Rng rng(2);
  for (auto& v : data) v = {rng.normal(), 0.0};
  for (auto _ : state) {
    auto copy = data;
    ser::dsp::fft(copy);
    benchmark::DoNotOptimize(copy.data());
  }
}
BENCHMARK(BM_Fft)->Arg(512)->Arg(4096);

void BM_Mfcc(benchmark::State& state) {
  const ser::dsp::MfccExtractor mfcc(ser::dsp::kSupportedSampleRate, 400);
  std::vector<double> frame(400);
  ser::Rng rng(3);
  for (auto& v : frame) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(mfcc.compute(frame));
}
BENCHMARK(BM_Mfcc);

}  // namespace
