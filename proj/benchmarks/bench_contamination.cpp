#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "metasynth/contamination.hpp"

namespace {

std::vector<std::string> texts(std::size_t n, std::size_t words, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    for (std::size_t w = 0; w < words; ++w) s += "t" + std::to_string(rng() % 20000) + " ";
    out.push_back(std::move(s));
  }
  return out;
}

void BM_EmOverlap(benchmark::State& state) {
  const auto refs = texts(1000, 60, 1);
  const auto targets = texts(static_cast<std::size_t>(state.range(0)), 400, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(metasynth::contamination::em_overlap(refs, targets, {1, 2, 3, 5, 10}));
  }
}
BENCHMARK(BM_EmOverlap)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
