#include <benchmark/benchmark.h>

#include <omp.h>

#include "stablab/covlab.hpp"

using namespace stablab;

namespace {

std::vector<StatisticSpec> specs() {
  return {{"V", ScoreSpec::unit(), RegionSpec::whole_window(), TestFn::constant(1.0)},
          {"E", ScoreSpec::rgg_subgraph(Pattern::edge(), Radius::scaled(1.0)),
           RegionSpec::whole_window(), TestFn::constant(1.0)},
          {"L", ScoreSpec::knn_edge(1, 1.0), RegionSpec::whole_window(), TestFn::constant(1.0)}};
}

void BM_ReplicateSerial(benchmark::State& st) {
  const auto sp = specs();
  const double s = static_cast<double>(st.range(0));
  for (auto _ : st) {
    auto b = replicate_serial(WindowSpec::unit_cube(2), sp, s, 32, 1);
    benchmark::DoNotOptimize(b.values.data.data());
  }
  st.SetItemsProcessed(st.iterations() * 32);
}

void BM_ReplicateOpenMP(benchmark::State& st) {
  const auto sp = specs();
  const double s = static_cast<double>(st.range(0));
  ReplicateOptions o;
  o.threads = omp_get_max_threads();
  for (auto _ : st) {
    auto b = replicate(WindowSpec::unit_cube(2), sp, s, 32, 1, o);
    benchmark::DoNotOptimize(b.values.data.data());
  }
  st.SetItemsProcessed(st.iterations() * 32);
  st.counters["threads"] = o.threads;
}

void BM_RggCovExact(benchmark::State& st) {
  const int d = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(rgg_cov_exact(d, 1.0, 65536.0).gap);
}

}  // namespace

BENCHMARK(BM_ReplicateSerial)->Arg(1024)->Arg(16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicateOpenMP)->Arg(1024)->Arg(16384)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RggCovExact)->DenseRange(2, 4)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
