#include <benchmark/benchmark.h>

#include "ct/cluster.hpp"
#include "ct/customize.hpp"
#include "ct/glm.hpp"
#include "ct/model_selection.hpp"
#include "ct/random.hpp"
#include "ct/simulation.hpp"

namespace {

ct::Matrix random_rows(std::uint64_t seed, std::size_t n, std::size_t p) {
  ct::Rng rng(seed);
  ct::Matrix m(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) m(i, j) = rng.normal();
  return m;
}

void BM_HclustComplete(benchmark::State& state) {
  const auto rows = random_rows(1, static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto dend = ct::hclust_complete(rows);
    benchmark::DoNotOptimize(dend);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_HclustComplete)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_KnnQueries(benchmark::State& state) {
  const auto ref = random_rows(2, static_cast<std::size_t>(state.range(0)), 16);
  const auto query = random_rows(3, 64, 16);
  for (auto _ : state) {
    auto nn = ct::knn_indices(query, ref, 10);
    benchmark::DoNotOptimize(nn);
  }
}
BENCHMARK(BM_KnnQueries)->RangeMultiplier(4)->Range(256, 16384);

void BM_GaussianPathFit(benchmark::State& state) {
  ct::SimConfig config;
  config.n = static_cast<std::size_t>(state.range(0));
  config.m = 3;
  config.p = 100;
  config.sigma_c = 10.0;
  config.seed = 7;
  const ct::SimInstance inst = ct::generate_instance(config);
  const ct::Response y = ct::Response::regression(inst.train.response);
  for (auto _ : state) {
    auto fit = ct::fit_glm_auto(inst.train.features, y, ct::GlmFamily::gaussian());
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_GaussianPathFit)->Arg(100)->Arg(300);

void BM_BinomialPathFit(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto x = random_rows(11, n, 50);
  ct::Rng rng(13);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = x(i, 0) + 0.5 * rng.normal() > 0 ? 1 : 0;
  const ct::Response y = ct::Response::classes(labels);
  for (auto _ : state) {
    auto fit = ct::fit_glm_auto(x, y, ct::GlmFamily::binomial());
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_BinomialPathFit)->Arg(100)->Arg(300);

void BM_CvSelect(benchmark::State& state) {
  ct::SimConfig config;
  config.n = 120;
  config.m = 3;
  config.p = 50;
  config.sigma_c = static_cast<double>(state.range(0));
  config.seed = 5;
  const ct::SimInstance inst = ct::generate_instance(config);
  const ct::Response y = ct::Response::regression(inst.train.response);
  const auto fractions = ct::default_lambda_fractions(50);
  ct::CvOptions options;
  options.fit.n_lambda = 50;
  for (auto _ : state) {
    auto report = ct::cv_select(inst.train.features, y, ct::GlmFamily::gaussian(),
                                {1, 2, 3, 5}, fractions, 5, 17, ct::LossSpec::squared(),
                                options);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_CvSelect)->Arg(0)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
