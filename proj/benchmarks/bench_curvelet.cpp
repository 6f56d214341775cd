#include <benchmark/benchmark.h>

#include "curvreg/curvelet.hpp"
#include "curvreg/rng.hpp"

namespace {

using namespace curvreg;

Grid<double> random_image(int width, int height, uint64_t seed) {
  SplitMix64 rng(seed);
  Grid<double> img(width, height);
  for (double& v : img) v = rng.uniform(0.0, 1.0);
  return img;
}

void bench_fdct_forward(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int height = static_cast<int>(state.range(1));
  CurveletConfig cfg;
  cfg.n_scales = static_cast<int>(state.range(2));
  const Grid<double> img = random_image(width, height, 42);
  const auto plan = make_fdct_plan(width, height, cfg);
  for (auto _ : state) {
    CurveletPyramid pyr = fdct_forward(img, plan);
    benchmark::DoNotOptimize(pyr.bands.data());
  }
  state.SetItemsProcessed(state.iterations() * img.size());
}

void bench_fdct_inverse(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const int height = static_cast<int>(state.range(1));
  CurveletConfig cfg;
  cfg.n_scales = static_cast<int>(state.range(2));
  const Grid<double> img = random_image(width, height, 42);
  const CurveletPyramid pyr = fdct_forward(img, cfg);
  for (auto _ : state) {
    Grid<double> back = fdct_inverse(pyr);
    benchmark::DoNotOptimize(back.data());
  }
  state.SetItemsProcessed(state.iterations() * img.size());
}

BENCHMARK(bench_fdct_forward)
    ->Args({128, 128, 4})
    ->Args({256, 256, 4})
    ->Args({720, 360, 4})
    ->Unit(benchmark::kMillisecond);

BENCHMARK(bench_fdct_inverse)
    ->Args({128, 128, 4})
    ->Args({256, 256, 4})
    ->Args({720, 360, 4})
    ->Unit(benchmark::kMillisecond);

}  // namespace
