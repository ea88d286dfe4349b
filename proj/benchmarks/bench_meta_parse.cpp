#include <benchmark/benchmark.h>

#include <string>

#include "metasynth/meta_engine.hpp"

namespace {

void BM_ParseExpertCall(benchmark::State& state) {
  std::string text = "Let me consult an expert about the next document.\n";
  for (int i = 0; i < state.range(0); ++i) text += "Some reasoning words before the call. ";
  text += "\nCybersecurity Expert:\n\"\"\"\nWrite a 400-word document on authentication.\n\"\"\"";
  const auto cfg = metasynth::meta::EngineConfig::for_documents();
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::meta::parse_meta_output(text, cfg));
}
BENCHMARK(BM_ParseExpertCall)->Arg(10)->Arg(1000);

void BM_ParseFinalAnswer(benchmark::State& state) {
  std::string text = "<document>\n";
  for (int i = 0; i < state.range(0); ++i) text += "word ";
  text += "\n</document>\n<END>";
  const auto cfg = metasynth::meta::EngineConfig::for_documents();
  for (auto _ : state) benchmark::DoNotOptimize(metasynth::meta::parse_meta_output(text, cfg));
}
BENCHMARK(BM_ParseFinalAnswer)->Arg(400)->Arg(4000);

}  // namespace
