#include <benchmark/benchmark.h>

#include "slowfast/fractional.hpp"
#include "slowfast/noise.hpp"

using namespace slowfast;

namespace {

SampledFunction path(std::int64_t n, std::uint64_t seed) {
  return SampledFunction(sample_fbm(TimeGrid(1.0, static_cast<std::size_t>(n)), HurstParameter(0.75), 1, seed));
}

}  // namespace

static void BM_AlphaInftyNorm(benchmark::State& state) {
  const SampledFunction f = path(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(w_alpha_infty_norm(f, AlphaExponent(0.35)));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AlphaInftyNorm)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

static void BM_WeylLambda(benchmark::State& state) {
  const SampledFunction g = path(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(weyl_lambda_alpha(g, AlphaExponent(0.35)));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_WeylLambda)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

static void BM_AlphaOneNorm(benchmark::State& state) {
  const SampledFunction f = path(state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(w_alpha_1_norm(f, AlphaExponent(0.35)));
}
BENCHMARK(BM_AlphaOneNorm)->Arg(1024)->Arg(4096);

static void BM_YoungIntegral(benchmark::State& state) {
  const SampledFunction f = path(state.range(0), 4), g = path(state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(young_integral(f, g));
}
BENCHMARK(BM_YoungIntegral)->Arg(1 << 16);
