#include <benchmark/benchmark.h>

#include "slowfast/noise.hpp"

using namespace slowfast;

static void BM_CirculantFbm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const CirculantFbmSampler sampler(TimeGrid(1.0, n), HurstParameter(0.75));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(1, seed++));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CirculantFbm)->RangeMultiplier(4)->Range(256, 1 << 16)->Complexity(benchmark::oNLogN);

static void BM_CholeskyFbm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const CholeskyFbmSampler sampler(TimeGrid(1.0, n), HurstParameter(0.75));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(1, seed++));
}
BENCHMARK(BM_CholeskyFbm)->RangeMultiplier(4)->Range(256, 4096);

static void BM_Brownian(benchmark::State& state) {
  const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_bm(grid, 1, seed++));
}
BENCHMARK(BM_Brownian)->Arg(1 << 12)->Arg(1 << 16);
