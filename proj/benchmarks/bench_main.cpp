#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "mitodet/eval.hpp"
#include "mitodet/fusion.hpp"
#include "mitodet/random.hpp"
#include "mitodet/stain.hpp"
#include "mitodet/tiler.hpp"

namespace mitodet {
namespace {

std::vector<Detection> clustered_boxes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Detection> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Groups of about six jittered copies, as TTA and overlapping tiles produce.
    const double cx = 50.0 + 40.0 * static_cast<double>(i / 6 % 40);
    const double cy = 50.0 + 40.0 * static_cast<double>(i / 240);
    const double x = cx + rng.normal(0.0, 1.0) * 2.0, y = cy + rng.normal(0.0, 1.0) * 2.0;
    out.emplace_back(PixelBox{x - 25, y - 25, x + 25, y + 25}, rng.uniform01());
  }
  return out;
}

void BM_Iou(benchmark::State& state) {
  const PixelBox a{0, 0, 50, 50}, b{10, 12, 60, 61};
  for (auto _ : state) benchmark::DoNotOptimize(iou(a, b));
}
BENCHMARK(BM_Iou);

void BM_Nms(benchmark::State& state) {
  const auto dets = clustered_boxes(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Nms)->Range(64, 4096);

void BM_Wbf(benchmark::State& state) {
  const auto dets = clustered_boxes(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(wbf(dets, 0.55));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Wbf)->Range(64, 4096);

void BM_PlanGrid(benchmark::State& state) {
  const RoiSpec roi{"wsi", static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(plan_grid(roi, TileGridConfig{}));
}
BENCHMARK(BM_PlanGrid)->Arg(6100)->Arg(50000);

RgbImage stained_tile(int size) {
  // Two-stain Beer-Lambert tile with a white background strip.
  Rng rng(3);
  RgbImage img(size, size, 255);
  const double h[3] = {0.65, 0.70, 0.29}, e[3] = {0.07, 0.99, 0.11};
  for (int y = 0; y < size; ++y) {
    for (int x = size / 8; x < size; ++x) {
      const double ch = 1.2 * rng.uniform01(), ce = 0.9 * rng.uniform01();
      for (int c = 0; c < 3; ++c) {
        const double od = h[c] * ch + e[c] * ce;
        img.pixel(x, y)[c] = static_cast<std::uint8_t>(std::lround(255.0 * std::pow(10.0, -od)));
      }
    }
  }
  return img;
}

void BM_FitStainProfile(benchmark::State& state) {
  const auto tile = stained_tile(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_stain_profile(tile));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_FitStainProfile)->Arg(256)->Arg(640)->Unit(benchmark::kMillisecond);

void BM_Match(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<Detection> preds;
  std::vector<Annotation> gts;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform01() * 4000, y = rng.uniform01() * 4000;
    preds.emplace_back(PixelBox{x - 25, y - 25, x + 25, y + 25}, rng.uniform01());
    gts.push_back({{x + rng.normal(0.0, 1.0) * 10, y + rng.normal(0.0, 1.0) * 10}});
  }
  for (auto _ : state) benchmark::DoNotOptimize(match(preds, gts, 30.0));
}
BENCHMARK(BM_Match)->Range(16, 1024);

}  // namespace
}  // namespace mitodet

BENCHMARK_MAIN();
