#include <random>

#include <benchmark/benchmark.h>

#include "emowatch/evaluation.hpp"
#include "emowatch/features.hpp"
#include "emowatch/models.hpp"
#include "emowatch/synthesis.hpp"

using namespace emowatch;

namespace {

const std::vector<SessionRecording>& corpus() {
  static const auto c = [] {
    GeneratorConfig cfg;
    cfg.seed = 7;
    return generate_corpus(cfg);
  }();
  return c;
}

const FeatureMatrix& statistical() {
  static const auto m = build_dataset(corpus(), DatasetFlavor::statistical);
  return m;
}

void BM_ComputeHrv(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> bpm(50, 150);
  std::vector<HrReading> hr(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < hr.size(); ++i) hr[i] = {static_cast<std::int64_t>(i) * 1000, bpm(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(compute_hrv(hr));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ComputeHrv)->Arg(60)->Arg(600)->Arg(6000);

void BM_BuildStatisticalDataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(corpus(), DatasetFlavor::statistical));
}
BENCHMARK(BM_BuildStatisticalDataset);

void BM_FitTree(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fit(ModelKind::dtree, statistical(), {}, 0));
}
BENCHMARK(BM_FitTree);

void BM_FitForest(benchmark::State& state) {
  ModelConfig c;
  c.rforest.trees = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit(ModelKind::rforest, statistical(), c, 0));
}
BENCHMARK(BM_FitForest)->Arg(10)->Arg(100);

void BM_MlpEpoch(benchmark::State& state) {
  ModelConfig c;
  c.mlp.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit(ModelKind::mlp, statistical(), c, 0));
}
BENCHMARK(BM_MlpEpoch);

void BM_AblationCell(benchmark::State& state) {
  AblationConfig cfg;
  cfg.feature_sets = {statistical_feature_sets()[0]};
  cfg.models = {ModelKind::rforest};
  cfg.repeats = 10;
  for (auto _ : state) benchmark::DoNotOptimize(run_ablation(statistical(), cfg));
}
BENCHMARK(BM_AblationCell)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
