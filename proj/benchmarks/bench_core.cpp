#include "ssls/assimilator.hpp"
#include "ssls/metrics.hpp"
#include "ssls/models.hpp"
#include "ssls/sampler.hpp"
#include "ssls/score_net.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ssls;

Ensemble gaussian(Index n, Index d, std::uint64_t seed) {
  Stream rng(seed);
  Ensemble e(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) e(i, j) = rng.normal();
  return e;
}

void BM_ScoreForwardBatch(benchmark::State& state) {
  const Index n = state.range(0);
  const Index d = state.range(1);
  Stream rng(1);
  const ScoreNetwork net = ScoreNetwork::glorot(d, {128, 128}, Activation::kSigmoid, rng);
  const Ensemble x = gaussian(n, d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_batch(x));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ScoreForwardBatch)->Args({1000, 1})->Args({500, 20});

void BM_TrainEpoch(benchmark::State& state) {
  const Index n = state.range(0);
  const Index d = state.range(1);
  const Ensemble x = gaussian(n, d, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_score(x, cfg, nullptr, 4));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TrainEpoch)->Args({1000, 1})->Args({500, 20})->Unit(benchmark::kMillisecond);

void BM_AlmcUpdate(benchmark::State& state) {
  const Index n = state.range(0);
  const Index d = state.range(1);
  Stream rng(5);
  const ScoreNetwork net = ScoreNetwork::glorot(d, {128, 128}, Activation::kSigmoid, rng);
  const Ensemble x = gaussian(n, d, 6);
  const BatchField score = [&](const Ensemble& z) { return net.forward_batch(z); };
  const PointField grad = [](const Vector& z) -> Vector { return -4.0 * z; };
  const AnnealPlan plan = AnnealPlan::linear(10, 10, 0.004);
  for (auto _ : state) benchmark::DoNotOptimize(almc_update(x, score, grad, plan, 7, 1));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_AlmcUpdate)->Args({1000, 1})->Args({500, 20})->Unit(benchmark::kMillisecond);

void BM_Crps(benchmark::State& state) {
  const Ensemble x = gaussian(state.range(0), 20, 8);
  const Vector truth = Vector::Zero(20);
  for (auto _ : state) benchmark::DoNotOptimize(crps(x, truth));
}
BENCHMARK(BM_Crps)->Arg(100)->Arg(1000)->Arg(10000);

void BM_Lorenz96Step(benchmark::State& state) {
  const ModelSpec model = make_lorenz96();
  Vector z = Vector::Constant(20, 8.0);
  z[0] += 0.01;
  for (auto _ : state) {
    z = model.dynamics(z, model.zero_noise());
    benchmark::DoNotOptimize(z.data());
  }
}
BENCHMARK(BM_Lorenz96Step);

void BM_Predict(benchmark::State& state) {
  const ModelSpec model = make_lorenz96();
  const Ensemble x = sample_initial_prior(model, state.range(0), 9);
  for (auto _ : state) benchmark::DoNotOptimize(predict(x, model, 1, 1));
}
BENCHMARK(BM_Predict)->Arg(500);

}  // namespace
BENCHMARK_MAIN();
