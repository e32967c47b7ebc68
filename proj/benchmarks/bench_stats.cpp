#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ghostmark/stats.hpp"

namespace {

using namespace ghostmark;

std::vector<std::vector<double>> gaussian_groups(int n_groups, int group_size) {
  std::mt19937 rng(17);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> groups(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    groups[g].reserve(group_size);
    for (int i = 0; i < group_size; ++i) {
      groups[g].push_back(0.25 * g + noise(rng));
    }
  }
  return groups;
}

void bm_one_way_anova(benchmark::State& state) {
  auto groups = gaussian_groups(5, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    AnovaResult r = one_way_anova(groups);
    benchmark::DoNotOptimize(r.f_stat);
  }
}

void bm_repeated_measures(benchmark::State& state) {
  auto grid = gaussian_groups(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    AnovaResult r = repeated_measures_anova(grid);
    benchmark::DoNotOptimize(r.f_stat);
  }
}

void bm_f_cdf(benchmark::State& state) {
  double x = 0.0;
  for (auto _ : state) {
    x += 0.001;
    if (x > 10.0) {
      x = 0.001;
    }
    double p = f_cdf(x, 4, 7445);
    benchmark::DoNotOptimize(p);
  }
}

}  // namespace

BENCHMARK(bm_one_way_anova)->Arg(100)->Arg(10000);
BENCHMARK(bm_repeated_measures)->Arg(100)->Arg(2000);
BENCHMARK(bm_f_cdf);
