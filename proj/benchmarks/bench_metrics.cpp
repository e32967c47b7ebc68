#include <benchmark/benchmark.h>

#include <string>

#include "ghostmark/metrics.hpp"

namespace {

using namespace ghostmark;

std::string prose(int repeats) {
  std::string out;
  for (int i = 0; i < repeats; ++i) {
    out +=
        "Please review the updated draft and send your comments before the "
        "meeting on Thursday so we can close the agenda in good time. ";
  }
  return out;
}

void bm_ngram_embed(benchmark::State& state) {
  NgramHashProvider provider;
  std::string text = prose(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    std::vector<double> v = provider.embed(text);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}

void bm_compute_sps(benchmark::State& state) {
  NgramHashProvider provider;
  std::string a = prose(static_cast<int>(state.range(0)));
  std::string b = "Kindly " + a;
  for (auto _ : state) {
    SpsValue s = compute_sps(a, b, provider);
    benchmark::DoNotOptimize(s.value);
  }
}

}  // namespace

BENCHMARK(bm_ngram_embed)->Arg(1)->Arg(8)->Arg(64);
BENCHMARK(bm_compute_sps)->Arg(8);
