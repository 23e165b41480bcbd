#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "robustvi/diagnostics.hpp"
#include "robustvi/rng.hpp"

using namespace robustvi;

namespace {

diagnostics::IterateChains make_chains(int num_chains, int dim, std::int64_t iterations,
                                       std::uint64_t seed) {
  diagnostics::IterateChains chains(num_chains, dim);
  Rng rng = make_rng(seed);
  for (std::int64_t t = 0; t < iterations; ++t) {
    for (int j = 0; j < num_chains; ++j) {
      chains.append(j, draw_standard_normal(rng, dim));
    }
  }
  return chains;
}

void BM_SplitRhat(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const diagnostics::IterateChains chains = make_chains(2, dim, 100, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagnostics::split_rhat(chains, 100));
  }
}
BENCHMARK(BM_SplitRhat)->Arg(16)->Arg(256)->Arg(2048);

void BM_EssMcse(benchmark::State& state) {
  const std::int64_t window = state.range(0);
  const diagnostics::IterateChains chains = make_chains(1, 8, window, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagnostics::ess_mcse(chains, window));
  }
}
BENCHMARK(BM_EssMcse)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_GpdFit(benchmark::State& state) {
  Rng rng = make_rng(3);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> excesses(static_cast<std::size_t>(state.range(0)));
  for (auto& v : excesses) {
    v = expo(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagnostics::gpd_fit(excesses));
  }
}
BENCHMARK(BM_GpdFit)->Arg(135)->Arg(2000);

void BM_KhatIterates(benchmark::State& state) {
  const diagnostics::IterateChains chains = make_chains(1, 4, state.range(0), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagnostics::khat_iterates(chains, state.range(0)));
  }
}
BENCHMARK(BM_KhatIterates)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
