#include <benchmark/benchmark.h>

// The distribution's libbenchmark_main.a carries LTO bytecode from another
// compiler release, so the entry point is defined here.
BENCHMARK_MAIN();
