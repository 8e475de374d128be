// Serial reference vs OpenMP kernels on a 17-asset ensemble.

#include <benchmark/benchmark.h>

#include "eigenfolio/parallel.hpp"
#include "eigenfolio/reference.hpp"
#include "eigenfolio/rmt_bench.hpp"
#include "eigenfolio/spectral.hpp"

using namespace eigenfolio;

namespace {

const EnsembleSpec kSpec{Distribution::cauchy, 0.05, 17, 100, 1000, 7};

const std::vector<EigenSystem>& spectra() {
  static const auto eig = eig_ensemble(sample_benchmark_ensemble(kSpec));
  return eig;
}

void threads_from(const benchmark::State& state) { set_thread_count(static_cast<int>(state.range(0))); }

void BM_SampleReference(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(reference::sample_benchmark_ensemble(kSpec));
}

void BM_SampleParallel(benchmark::State& state) {
  threads_from(state);
  for (auto _ : state) benchmark::DoNotOptimize(sample_benchmark_ensemble(kSpec));
  set_thread_count(0);
}

void BM_DosReference(benchmark::State& state) {
  const auto grid = linear_grid(0.0, 3.0, 600);
  for (auto _ : state) benchmark::DoNotOptimize(reference::dos_green(spectra(), grid, 0.05));
}

void BM_DosParallel(benchmark::State& state) {
  threads_from(state);
  const auto grid = linear_grid(0.0, 3.0, 600);
  for (auto _ : state) benchmark::DoNotOptimize(dos_green(spectra(), grid, 0.05));
  set_thread_count(0);
}

void BM_PrReference(benchmark::State& state) {
  const auto grid = linear_grid(0.3, 2.5, 200);
  for (auto _ : state) benchmark::DoNotOptimize(reference::expected_pr(spectra(), grid, SigmaPolicy{}));
}

void BM_PrParallel(benchmark::State& state) {
  threads_from(state);
  const auto grid = linear_grid(0.3, 2.5, 200);
  for (auto _ : state) benchmark::DoNotOptimize(expected_pr(spectra(), grid, SigmaPolicy{}));
  set_thread_count(0);
}

}  // namespace

BENCHMARK(BM_SampleReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleParallel)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DosReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DosParallel)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrParallel)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
