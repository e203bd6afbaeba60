#include <benchmark/benchmark.h>

#include "x3dforge/arch.hpp"
#include "x3dforge/cost.hpp"
#include "x3dforge/criterion.hpp"
#include "x3dforge/expansion.hpp"

using namespace x3df;

namespace {

void BM_Instantiate(benchmark::State& state) {
  const ExpansionFactors f = preset_factors("X3D-XL");
  for (auto _ : state) {
    benchmark::DoNotOptimize(instantiate(f));
  }
}
BENCHMARK(BM_Instantiate);

void BM_CountFlops(benchmark::State& state) {
  const ArchSpec spec = instantiate(preset_factors("X3D-XL"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(count_flops(spec));
  }
}
BENCHMARK(BM_CountFlops);

void BM_Report(benchmark::State& state) {
  const ArchSpec spec = instantiate(preset_factors("X3D-M"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(report(spec));
  }
}
BENCHMARK(BM_Report);

void BM_SolveKnob(benchmark::State& state) {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const ExpansionFactors start;
  const std::int64_t target = 2 * cost.flops(start);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_knob(start, Axis::kBottleneck, target, cost.flops));
  }
}
BENCHMARK(BM_SolveKnob);

void BM_AnalyticExpansionToS(benchmark::State& state) {
  const CostFns cost = make_cost_fns(ArchConfig{});
  const AnalyticParams params;
  const ScoreFn score = [&params](const ExpansionFactors& f) {
    return analytic_oracle(f, params);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_expand(ExpansionFactors{},
                                            regime_bound(Regime::kS), score,
                                            cost, ExpansionSettings{},
                                            "analytic"));
  }
}
BENCHMARK(BM_AnalyticExpansionToS);

}  // namespace
