#include <random>

#include <benchmark/benchmark.h>

#include "driftgate/parallel.hpp"
#include "driftgate/scorer.hpp"
#include "driftgate/stats.hpp"

namespace {

using driftgate::NormalStats;

Eigen::MatrixXd gaussian(Eigen::Index dim, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(dim, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

NormalStats model(std::size_t dim) {
  return NormalStats::init_gaussian(dim, {64, 1.0, 0}, driftgate::FixedAlpha{0.1});
}

// Args: dim, patches.
void BM_Score(benchmark::State& state) {
  driftgate::set_max_threads(1);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto patches = state.range(1);
  const NormalStats stats = model(dim);
  const auto snap = stats.snapshot();
  const Eigen::MatrixXd batch = gaussian(static_cast<Eigen::Index>(dim), patches, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(driftgate::score_batch(*snap, batch));
  }
  state.SetItemsProcessed(state.iterations() * patches);
}

// Absorb plus the refactorization the next score needs.
void BM_Absorb(benchmark::State& state) {
  driftgate::set_max_threads(1);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto patches = state.range(1);
  NormalStats stats = model(dim);
  const Eigen::MatrixXd batch = gaussian(static_cast<Eigen::Index>(dim), patches, 2);
  for (auto _ : state) {
    stats.absorb(batch);
    benchmark::DoNotOptimize(stats.snapshot());
  }
  state.SetItemsProcessed(state.iterations() * patches);
}

void BM_LedoitWolfAbsorb(benchmark::State& state) {
  driftgate::set_max_threads(1);
  const auto dim = static_cast<std::size_t>(state.range(0));
  NormalStats stats =
      NormalStats::init_gaussian(dim, {64, 1.0, 0}, driftgate::LedoitWolfAlpha{1024});
  const Eigen::MatrixXd batch = gaussian(static_cast<Eigen::Index>(dim), 1, 3);
  for (auto _ : state) {
    stats.absorb(batch);
    benchmark::DoNotOptimize(stats.snapshot());
  }
}

void table_shape(benchmark::internal::Benchmark* b) {
  for (int dim : {128, 512, 2560}) {
    for (int patches : {1, 4, 16, 64}) b->Args({dim, patches});
  }
  b->ArgNames({"dim", "patches"})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Score)->Apply(table_shape);
BENCHMARK(BM_Absorb)->Apply(table_shape);
BENCHMARK(BM_LedoitWolfAbsorb)->Arg(128)->Arg(512)->Arg(2560)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
