#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "metasynth/diversity.hpp"

namespace {

std::vector<std::vector<double>> vectors(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> v(n, std::vector<double>(dim));
  for (auto& x : v) {
    for (auto& c : x) c = g(rng);
  }
  return v;
}

std::vector<std::string> corpus(std::size_t docs, std::size_t words) {
  std::mt19937_64 rng(2);
  std::vector<std::string> c;
  for (std::size_t d = 0; d < docs; ++d) {
    std::string s;
    for (std::size_t w = 0; w < words; ++w) s += "w" + std::to_string(rng() % 5000) + " ";
    c.push_back(std::move(s));
  }
  return c;
}

void BM_RemoteClique(benchmark::State& state) {
  const auto v = vectors(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::diversity::remote_clique(v));
}
BENCHMARK(BM_RemoteClique)->Arg(100)->Arg(1000);

void BM_Chamfer(benchmark::State& state) {
  const auto v = vectors(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::diversity::chamfer(v));
}
BENCHMARK(BM_Chamfer)->Arg(100)->Arg(1000);

void BM_NgdSum(benchmark::State& state) {
  const auto c = corpus(static_cast<std::size_t>(state.range(0)), 400);
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::diversity::ngd_sum(c));
}
BENCHMARK(BM_NgdSum)->Arg(100)->Arg(1000);

void BM_CompressionRatio(benchmark::State& state) {
  const auto c = corpus(static_cast<std::size_t>(state.range(0)), 400);
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::diversity::compression_ratio(c));
}
BENCHMARK(BM_CompressionRatio)->Arg(100)->Arg(1000);

void BM_BootstrapMean(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (auto& v : x) v = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::diversity::bootstrap_ci(x, 1000, 0.95, 7));
}
BENCHMARK(BM_BootstrapMean)->Arg(1000);

}  // namespace
