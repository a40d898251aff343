#include <benchmark/benchmark.h>

#include "slowfast/averaging.hpp"
#include "slowfast/harness.hpp"
#include "slowfast/khasminskii.hpp"

using namespace slowfast;

static void BM_SlowFastSolve(benchmark::State& state) {
  const Benchmark b = load_benchmark("linear-ou");
  SystemConfig cfg;
  cfg.epsilon = 1.0 / static_cast<double>(state.range(0));
  const NoiseSet noise = make_noise(b.coefficients.dims, cfg, replicate_seeds(1, 0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_slow_fast(b.coefficients, cfg, noise.w1, noise.w2, noise.bh));
  state.counters["micro_factor"] = static_cast<double>(cfg.micro_factor());
}
BENCHMARK(BM_SlowFastSolve)->Arg(10)->Arg(100)->Arg(1000);

static void BM_AveragedDrift(benchmark::State& state) {
  const Benchmark b = load_benchmark("cubic");
  const Vector x = Vector::Constant(1, 0.5);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(averaged_drift(b.coefficients, 0.0, x, static_cast<double>(state.range(0)), seed++));
  }
}
BENCHMARK(BM_AveragedDrift)->Arg(100)->Arg(1000);

static void BM_ConvergenceSweep(benchmark::State& state) {
  const Benchmark b = load_benchmark("linear-ou");
  SweepConfig cfg;
  cfg.reps = static_cast<std::size_t>(state.range(0));
  cfg.check_discretization = false;
  for (auto _ : state) benchmark::DoNotOptimize(run_convergence_sweep(b, cfg));
}
BENCHMARK(BM_ConvergenceSweep)->Arg(20)->Unit(benchmark::kMillisecond);
