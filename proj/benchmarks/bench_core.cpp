#include <benchmark/benchmark.h>

#include "ife/estimator.hpp"
#include "ife/linalg.hpp"
#include "ife/random.hpp"
#include "ife/selection.hpp"
#include "ife/simulation.hpp"

namespace {

ife::Matrix gaussian(ife::Index rows, ife::Index cols, std::uint64_t seed) {
  ife::Rng rng(seed);
  ife::Matrix m(rows, cols);
  for (ife::Index j = 0; j < cols; ++j) {
    for (ife::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

ife::Draw static_draw(ife::Index size) {
  ife::DgpSpec spec;
  spec.n_units = size;
  spec.n_periods = size;
  return ife::generate(spec, 1, 0);
}

void BM_SymEigen(benchmark::State& state) {
  const ife::Index n = state.range(0);
  const ife::Matrix a = gaussian(n, n, 1);
  const ife::Matrix s = a * a.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(ife::sym_eigen(s));
}
BENCHMARK(BM_SymEigen)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_TopEigen(benchmark::State& state) {
  const ife::Index n = state.range(0);
  const ife::Matrix a = gaussian(n, n, 2);
  const ife::Matrix s = a * a.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(ife::top_eigen(s, 3));
}
BENCHMARK(BM_TopEigen)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ProfileObjective(benchmark::State& state) {
  const ife::Draw d = static_draw(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ife::profile_objective(d.data, d.truth.beta0, 2));
}
BENCHMARK(BM_ProfileObjective)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Estimate(benchmark::State& state) {
  const ife::Draw d = static_draw(state.range(0));
  ife::EstimatorConfig config;
  config.n_factors = 2;
  config.n_random_starts = 0;
  config.scheme = static_cast<ife::Scheme>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(ife::estimate(d.data, config));
}
BENCHMARK(BM_Estimate)
    ->ArgsProduct({{50, 100}, {0, 1, 2, 3}})
    ->ArgNames({"size", "scheme"})
    ->Unit(benchmark::kMillisecond);

void BM_SelectFactors(benchmark::State& state) {
  const ife::Matrix u = gaussian(100, 100, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ife::select_factors(u, 8));
}
BENCHMARK(BM_SelectFactors)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
