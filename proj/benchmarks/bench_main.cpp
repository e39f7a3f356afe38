#include <benchmark/benchmark.h>

#include "certkit/drift.hpp"
#include "certkit/random.hpp"
#include "certkit/stattest.hpp"
#include "certkit/uncertainty.hpp"

namespace {

using namespace certkit;

void BM_BinomialTest(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  const std::uint64_t k = n * 94 / 100;
  for (auto _ : state) benchmark::DoNotOptimize(binomial_test_one_sided(k, n, 0.9, Direction::at_least, 0.05));
}
BENCHMARK(BM_BinomialTest)->Arg(100)->Arg(10'000)->Arg(1'000'000);

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index n, Eigen::Index d, double shift) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal() + (j == 0 ? shift : 0.0);
  return m;
}

void BM_Mmd2Unbiased(benchmark::State& state) {
  Rng rng(1);
  const auto x = gaussian(rng, state.range(0), 8, 0.0);
  const auto y = gaussian(rng, state.range(0), 8, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2_unbiased(x, y, 1.0));
}
BENCHMARK(BM_Mmd2Unbiased)->Arg(100)->Arg(500)->Arg(1000);

void BM_MmdPermutationTest(benchmark::State& state) {
  Rng rng(2);
  EncodedBatch x, y;
  x.data = gaussian(rng, state.range(0), 4, 0.0);
  y.data = gaussian(rng, state.range(0), 4, 0.0);
  const ShiftOptions opt{ShiftMethod::mmd_permutation, 0.05, 500, 3};
  for (auto _ : state) benchmark::DoNotOptimize(multivariate_shift_test(x, y, opt));
}
BENCHMARK(BM_MmdPermutationTest)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_Decompose(benchmark::State& state) {
  Rng rng(4);
  EnsemblePrediction e;
  const auto classes = static_cast<std::size_t>(state.range(1));
  for (std::int64_t m = 0; m < state.range(0); ++m) {
    std::vector<double> p(classes);
    double s = 0.0;
    for (auto& v : p) s += (v = rng.uniform_open());
    for (auto& v : p) v /= s;
    e.members.push_back(p);
  }
  for (auto _ : state) benchmark::DoNotOptimize(decompose(e));
}
BENCHMARK(BM_Decompose)->Args({5, 10})->Args({10, 100})->Args({50, 1000});

}  // namespace

BENCHMARK_MAIN();
