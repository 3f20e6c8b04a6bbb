#include <benchmark/benchmark.h>

#include "ser/models.h"
#include "ser/nn/layers.h"
#include "ser/random.h"

namespace {

ser::nn::SeqBatch gaussian(ser::Rng& rng, std::size_t batch, std::size_t steps, std::size_t dim) {
  ser::nn::SeqBatch x(batch, steps, dim);
  for (std::size_t b = 0; b < batch; ++b) {
    x.lengths[b] = steps - b % 4;
    for (std::size_t t = 0; t < x.lengths[b]; ++t)
      for (std::size_t d = 0; d < dim; ++d) x.row(b, t)[d] = rng.normal();
  }
  return x;
}

// Audio branch shapes: 36 -> 104 filters, kernel 9, up to 200 frames.
void BM_Conv1dForward(benchmark::State& state) {
  ser::Rng rng(1);
  const auto filters = static_cast<std::size_t>(state.range(0));
  ser::nn::Conv1d conv("c", 36, filters, 9, true);
  conv.init_xavier(rng);
  const auto x = gaussian(rng, 32, 200, 36);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, ser::nn::Mode::kEval));
}
BENCHMARK(BM_Conv1dForward)->Arg(52)->Arg(104)->Unit(benchmark::kMillisecond);

void BM_Conv1dBackward(benchmark::State& state) {
  ser::Rng rng(2);
  ser::nn::Conv1d conv("c", 36, 104, 9, true);
  conv.init_xavier(rng);
  const auto x = gaussian(rng, 32, 200, 36);
  const auto y = conv.forward(x, ser::nn::Mode::kTrain);
  auto g = gaussian(rng, 32, 200, 104);
  g.lengths = y.lengths;
  g.zero_padding();
  for (auto _ : state) benchmark::DoNotOptimize(conv.backward(g));
}
BENCHMARK(BM_Conv1dBackward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto kind = static_cast<ser::SystemKind>(state.range(0));
  auto model = ser::build_model(kind, ser::ModelConfig::for_variant(ser::SizeVariant::kSmall), 32, 0);
  ser::Rng rng(3);
  ser::nn::MaskedBatch audio, text;
  audio.data = gaussian(rng, 32, 80, ser::kAudioInputDim);
  text.data = gaussian(rng, 32, 12, 32);
  for (std::size_t b = 0; b < 32; ++b) {
    audio.ids.push_back("u" + std::to_string(b));
    audio.labels.push_back(static_cast<int>(b % 4));
  }
  text.ids = audio.ids;
  text.labels = audio.labels;
  ser::nn::AdamState adam;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ser::train_step(model, ser::uses_audio(kind) ? &audio : nullptr,
                                             ser::uses_text(kind) ? &text : nullptr, {1, 1, 1, 1}, adam));
  }
  state.SetLabel(std::string(ser::to_string(kind)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(ser::SystemKind::kAudioOnly))
    ->Arg(static_cast<int>(ser::SystemKind::kTextOnly))
    ->Arg(static_cast<int>(ser::SystemKind::kEfCs))
    ->Unit(benchmark::kMillisecond);

}  // namespace
