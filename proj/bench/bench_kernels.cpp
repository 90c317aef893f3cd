// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS to compare.
#include <random>

#include <benchmark/benchmark.h>

#include "dgp/aggregate.hpp"
#include "dgp/partition.hpp"

namespace {

dgp::Points uniform_points(Eigen::Index n, std::uint64_t seed) {
  dgp::Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  dgp::Points x(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = u(rng);
  return x;
}

const dgp::KernelConfig kMatern = dgp::KernelConfig::matern(2.5, 20.0);

void BM_GramSerial(benchmark::State& state) {
  const dgp::Points x = uniform_points(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dgp::serial::gram_matrix(kMatern, x, x));
}

void BM_GramParallel(benchmark::State& state) {
  const dgp::Points x = uniform_points(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dgp::gram_matrix(kMatern, x, x));
}

struct CombineFixture {
  dgp::AggregatedPosterior agg;
  dgp::Points grid;
  dgp::LocalPredictions lp;
};

CombineFixture make_combine(int m) {
  dgp::Dataset d;
  d.x = uniform_points(100 * m, 2);
  d.y = (6.0 * d.x.col(0).array()).sin().matrix();
  dgp::PartitionResult pr = dgp::partition_spatial_1d(d, m);
  std::vector<dgp::LocalPosterior> locals;
  for (int k = 0; k < m; ++k) {
    locals.push_back(dgp::fit(kMatern, 0.1, pr.shards[static_cast<std::size_t>(k)], k));
    locals.back().set_region(pr.partition.regions[static_cast<std::size_t>(k)]);
  }
  dgp::AggregatedPosterior agg(std::move(locals), dgp::AggregationRule::ExpWeight, pr.partition);
  dgp::Points grid = dgp::unit_grid(4001);
  dgp::LocalPredictions lp = dgp::predict_locals(agg, grid);
  return {std::move(agg), std::move(grid), std::move(lp)};
}

void BM_CombineSerial(benchmark::State& state) {
  const CombineFixture f = make_combine(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dgp::serial::combine(f.agg, f.grid, f.lp));
}

void BM_CombineParallel(benchmark::State& state) {
  const CombineFixture f = make_combine(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dgp::combine(f.agg, f.grid, f.lp));
}

}  // namespace

BENCHMARK(BM_GramSerial)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CombineSerial)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CombineParallel)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
