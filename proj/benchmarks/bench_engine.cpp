#include <benchmark/benchmark.h>

#include "x3dforge/arch.hpp"
#include "x3dforge/engine.hpp"
#include "x3dforge/rng.hpp"

using namespace x3df;

namespace {

Tensor5 random_tensor(int n, int c, int t, int h, int w, std::uint64_t seed) {
  Tensor5 out(n, c, t, h, w);
  Rng rng(seed);
  for (float& v : out.values) v = rng.next_uniform(1.0);
  return out;
}

// res3-sized layers of X3D-S: 13 frames at 20x20, 108 inner channels.
void BM_PointwiseConv(benchmark::State& state) {
  const Tensor5 in = random_tensor(1, 48, 13, 20, 20, 1);
  const Tensor5 kernel = random_tensor(108, 48, 1, 1, 1, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv3d(in, kernel, {1, 1, 1}, {0, 0, 0}, 1));
  }
  state.SetItemsProcessed(state.iterations() * 108LL * 13 * 20 * 20 * 48);
}
BENCHMARK(BM_PointwiseConv);

void BM_ChannelwiseConv3x3x3(benchmark::State& state) {
  const Tensor5 in = random_tensor(1, 108, 13, 20, 20, 3);
  const Tensor5 kernel = random_tensor(108, 1, 3, 3, 3, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv3d(in, kernel, {1, 1, 1}, {1, 1, 1}, 108));
  }
  state.SetItemsProcessed(state.iterations() * 108LL * 13 * 20 * 20 * 27);
}
BENCHMARK(BM_ChannelwiseConv3x3x3);

void BM_StridedSpatialConv(benchmark::State& state) {
  const Tensor5 in = random_tensor(1, 3, 13, 160, 160, 5);
  const Tensor5 kernel = random_tensor(24, 3, 1, 3, 3, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv3d(in, kernel, {1, 2, 2}, {0, 1, 1}, 1));
  }
  state.SetItemsProcessed(state.iterations() * 24LL * 13 * 80 * 80 * 27);
}
BENCHMARK(BM_StridedSpatialConv);

void BM_ForwardX2D(benchmark::State& state) {
  const ArchSpec spec = instantiate(preset_factors("X2D"));
  const WeightBundle weights = init_weights(spec, 7);
  const Tensor5 clip = random_tensor(1, 3, 1, 112, 112, 8);
  const EngineOptions opts{static_cast<int>(state.range(0))};
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(spec, weights, clip, opts));
  }
}
BENCHMARK(BM_ForwardX2D)->Arg(1)->Arg(2)->Arg(4);

void BM_FeaturesTinyClip(benchmark::State& state) {
  ExpansionFactors f;
  f.gamma_t = 4;
  f.gamma_w = 0.25;
  ArchConfig config;
  config.num_classes = 8;
  config.head_width = 64;
  const ArchSpec spec = instantiate(f, config);
  const WeightBundle weights = init_weights(spec, 7);
  const Tensor5 clip = random_tensor(1, 3, 4, 112, 112, 9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(features(spec, weights, clip));
  }
}
BENCHMARK(BM_FeaturesTinyClip);

}  // namespace
