#include "natlearn/experiments.hpp"
#include "natlearn/naturalize.hpp"
#include "natlearn/random.hpp"

#include <benchmark/benchmark.h>

namespace natlearn {
namespace {

void BM_Pinv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Matrix b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = standard_normal(rng);
  const MetricMatrix g{b * b.transpose()};
  for (auto _ : state) benchmark::DoNotOptimize(pseudo_inverse(g));
}
BENCHMARK(BM_Pinv)->Arg(2)->Arg(8)->Arg(32);

void BM_NaturalizedStep(benchmark::State& state) {
  ExperimentConfig cfg = ExperimentConfig::defaults(Variant::Fig2a);
  cfg.n_data = static_cast<int>(state.range(0));
  cfg.estimation = static_cast<EstimationChoice>(state.range(1));
  cfg.fisher_samples = 0;
  const auto data = generate_dataset(cfg.data_seed, cfg.n_data, cfg.true_mu, cfg.true_var);
  const auto rule = figure2_rule(cfg, data);
  const GaussianModel f(2, GaussianMode::LogDensity);
  const History h({f.from_moments(2.0, 4.0)});
  RunContext ctx(7);
  for (auto _ : state) benchmark::DoNotOptimize(rule->step(1, f, h, ctx));
  state.SetItemsProcessed(state.iterations() * cfg.n_data);
}
BENCHMARK(BM_NaturalizedStep)
    ->Args({1000, static_cast<int>(EstimationChoice::Pinv)})
    ->Args({1000, static_cast<int>(EstimationChoice::WStar)})
    ->Args({1000, static_cast<int>(EstimationChoice::TwoTimescale)})
    ->Args({100000, static_cast<int>(EstimationChoice::Pinv)});

void BM_GaussianGradSum(benchmark::State& state) {
  const GaussianModel f(3, static_cast<GaussianMode>(state.range(1)));
  const auto data = generate_dataset(1, static_cast<int>(state.range(0)), 3.0, 9.0);
  std::vector<Atom> atoms;
  for (double x : data) atoms.push_back(Atom{scalar_input(x), 1.0});
  const SignedMeasure mu(std::move(atoms));
  const ParamVector beta = f.from_moments(2.0, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(f.weighted_grad_sum(mu, beta));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GaussianGradSum)
    ->Args({100000, static_cast<int>(GaussianMode::LogDensity)})
    ->Args({100000, static_cast<int>(GaussianMode::Density)});

void BM_DensityValues(benchmark::State& state) {
  const GaussianModel f(3, GaussianMode::Density);
  const auto data = generate_dataset(1, static_cast<int>(state.range(0)), 3.0, 9.0);
  std::vector<Atom> atoms;
  for (double x : data) atoms.push_back(Atom{scalar_input(x), 1.0});
  const SignedMeasure mu(std::move(atoms));
  const ParamVector beta = f.from_moments(2.0, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(f.values(mu, beta));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DensityValues)->Arg(100000);

}  // namespace
}  // namespace natlearn

BENCHMARK_MAIN();
