#include <benchmark/benchmark.h>

#include <random>

#include "metasynth/seed_selection.hpp"

namespace {

void BM_NearestNeighbors(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  metasynth::seeds::Pool pool;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    metasynth::llm::Embedding e(384);
    for (auto& c : e) c = g(rng);
    pool.push_back({"p" + std::to_string(i), "", "t" + std::to_string(i % 50), std::move(e)});
  }
  metasynth::llm::Embedding q(384);
  for (auto& c : q) c = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::seeds::nearest_neighbors(q, pool, 5));
}
BENCHMARK(BM_NearestNeighbors)->Arg(1000)->Arg(10000);

}  // namespace
