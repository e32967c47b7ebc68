#include <benchmark/benchmark.h>

#include <string>

#include "ghostmark/detector.hpp"
#include "ghostmark/lexicon.hpp"
#include "ghostmark/text_norm.hpp"

namespace {

using namespace ghostmark;

const Lexicon& seed_lexicon() {
  static Lexicon lex = load_lexicon(std::string(GHOSTMARK_DATA_DIR) + "/seed_lexicon.json");
  return lex;
}

// Marker-rich prose: roughly one marker per clause, mixed case, a little
// punctuation to exercise boundary checks.
std::string marked_text(int repeats) {
  std::string out;
  for (int i = 0; i < repeats; ++i) {
    out +=
        "Kindly do the needful and revert back at the earliest; "
        "we can prepone the review, can or not? The team will chope "
        "the room, lah. My dear, well done on the go-slow report. ";
  }
  return out;
}

void bm_detect(benchmark::State& state) {
  const Lexicon& lex = seed_lexicon();
  std::string text = marked_text(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    DetectionResult r = detect(text, lex);
    benchmark::DoNotOptimize(r.occurrences.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}

void bm_detect_filtered(benchmark::State& state) {
  const Lexicon& lex = seed_lexicon();
  std::string text = marked_text(static_cast<int>(state.range(0)));
  VarietyFilter filter{{Variety::IndianEnglish}};
  for (auto _ : state) {
    DetectionResult r = detect(text, lex, filter);
    benchmark::DoNotOptimize(r.occurrences.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}

void bm_normalize(benchmark::State& state) {
  std::string text = marked_text(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    std::string n = normalize_text(text);
    benchmark::DoNotOptimize(n.data());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}

}  // namespace

BENCHMARK(bm_detect)->Arg(1)->Arg(8)->Arg(64);
BENCHMARK(bm_detect_filtered)->Arg(8);
BENCHMARK(bm_normalize)->Arg(8);
