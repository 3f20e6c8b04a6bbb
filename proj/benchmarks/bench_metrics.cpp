#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ser/metrics.h"
#include "ser/random.h"

namespace {

std::vector<ser::ScoredPrediction> random_predictions(std::size_t n) {
  ser::Rng rng(1);
  std::vector<ser::ScoredPrediction> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (auto& v : out[i].probs) sum += v = rng.uniform();
    for (auto& v : out[i].probs) v /= sum;
    out[i].id = std::to_string(i);
    out[i].label = static_cast<ser::Emotion>(i % ser::kNumClasses);
  }
  return out;
}

void BM_AucMetrics(benchmark::State& state) {
  const auto preds = random_predictions(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ser::auc_metrics(preds));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AucMetrics)->RangeMultiplier(4)->Range(256, 65536)->Complexity(benchmark::oNLogN);

void BM_EvaluatePredictions(benchmark::State& state) {
  const auto preds = random_predictions(2000);
  for (auto _ : state) benchmark::DoNotOptimize(ser::evaluate_predictions(preds));
}
BENCHMARK(BM_EvaluatePredictions);

}  // namespace
BENCHMARK_MAIN();
