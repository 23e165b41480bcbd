#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "robustvi/families.hpp"
#include "robustvi/gradients.hpp"
#include "robustvi/models.hpp"
#include "robustvi/optimizers.hpp"
#include "robustvi/rng.hpp"

using namespace robustvi;

namespace {

void BM_EstimateGrad(benchmark::State& state) {
  models::LinRegSpec spec;
  spec.p = static_cast<int>(state.range(0));
  spec.n = 300;
  spec.design_corr = 0.9;
  spec.seed = 1;
  const models::LinearRegressionModel model = models::linreg_generate(spec);
  const families::VariationalParams params =
      families::standard(families::FamilyKind::full_rank, spec.p);
  std::vector<int> batch(50);
  std::iota(batch.begin(), batch.end(), 0);
  Rng rng = make_rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradients::estimate_grad(model, params, 10, batch, rng));
  }
}
BENCHMARK(BM_EstimateGrad)->Arg(5)->Arg(20)->Arg(70);

void BM_OptimizerStep(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  optimizers::Optimizer opt(optimizers::OptimizerKind::rmsprop, 0.01, dim);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(dim);
  Rng rng = make_rng(3);
  const Eigen::VectorXd grad = draw_standard_normal(rng, dim);
  for (auto _ : state) {
    opt.step(params, grad);
    benchmark::DoNotOptimize(params);
  }
}
BENCHMARK(BM_OptimizerStep)->Arg(64)->Arg(2555);

void BM_FamilySample(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  Rng rng = make_rng(4);
  families::VariationalParams params =
      families::standard(families::FamilyKind::full_rank, p);
  params.scale_unconstrained =
      0.1 * draw_standard_normal(rng, params.scale_unconstrained.size());
  const Eigen::VectorXd noise = draw_standard_normal(rng, p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(families::sample(params, noise));
  }
}
BENCHMARK(BM_FamilySample)->Arg(5)->Arg(70);

}  // namespace

BENCHMARK_MAIN();
