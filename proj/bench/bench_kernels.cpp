// Serial reference vs OpenMP kernels on frame-sized inputs.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include "crowdforge/kernels.hpp"
#include "crowdforge/seeding.hpp"

#include <algorithm>
#include <cmath>

using namespace crowdforge;
namespace ks = crowdforge::kernels::serial;
namespace kp = crowdforge::kernels::parallel;

namespace {

GrayFrame random_gray(int w, int h, std::uint64_t seed) {
  SeededRng rng(seed);
  GrayFrame g(w, h);
  for (auto& v : g.data()) v = static_cast<std::uint8_t>(rng.index(256));
  return g;
}

Frame random_frame(int w, int h, std::uint64_t seed) {
  SeededRng rng(seed);
  Frame f(w, h);
  for (auto& v : f.data()) v = static_cast<std::uint8_t>(rng.index(256));
  return f;
}

ShadowFrame random_shadow(int w, int h, std::uint64_t seed) {
  SeededRng rng(seed);
  ShadowFrame s(w, h);
  for (auto& v : s.data()) v = static_cast<float>(rng.unit());
  return s;
}

Mask blob_mask(int w, int h) {
  Mask m(w, h);
  for (int y = h / 4; y < 3 * h / 4; ++y) {
    for (int x = w / 3; x < 2 * w / 3; ++x) m(x, y) = 255;
  }
  return m;
}

constexpr double kC1 = 6.5025, kC2 = 58.5225;

template <bool Parallel>
void BM_Ssim(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0)), h = w * 9 / 16;
  const auto a = random_gray(w, h, 1), b = random_gray(w, h, 2);
  const auto win = kernels::gaussian_weights(1.5, 5);
  for (auto _ : state) {
    double v = Parallel ? kp::ssim_mean(a, b, win, kC1, kC2) : ks::ssim_mean(a, b, win, kC1, kC2);
    benchmark::DoNotOptimize(v);
  }
  state.SetItemsProcessed(state.iterations() * w * h);
}

template <bool Parallel>
void BM_Blur(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0)), h = w * 9 / 16;
  const auto s = random_shadow(w, h, 3);
  const auto weights = kernels::gaussian_weights(std::max(1.0, 0.01 * h), static_cast<int>(std::ceil(3 * std::max(1.0, 0.01 * h))));
  for (auto _ : state) {
    auto out = Parallel ? kp::blur(s, weights) : ks::blur(s, weights);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * w * h);
}

template <bool Parallel>
void BM_Warp(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0)), h = w * 9 / 16;
  const auto src = blob_mask(w, h);
  const Affine inv = Affine::linear(0.9, 0.3, -0.2, 1.1);
  for (auto _ : state) {
    Mask dst(w, h);
    if (Parallel) {
      kp::warp_nearest(src, inv, dst);
    } else {
      ks::warp_nearest(src, inv, dst);
    }
    benchmark::DoNotOptimize(dst.data().data());
  }
  state.SetItemsProcessed(state.iterations() * w * h);
}

template <bool Parallel>
void BM_Darken(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0)), h = w * 9 / 16;
  const auto bg = random_frame(w, h, 4);
  const auto s = random_shadow(w, h, 5);
  for (auto _ : state) {
    auto out = Parallel ? kp::darken(bg, s, 0.7) : ks::darken(bg, s, 0.7);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * w * h);
}

}  // namespace

BENCHMARK(BM_Ssim<false>)->Name("ssim/serial")->Arg(640)->Arg(1280);
BENCHMARK(BM_Ssim<true>)->Name("ssim/parallel")->Arg(640)->Arg(1280);
BENCHMARK(BM_Blur<false>)->Name("blur/serial")->Arg(640)->Arg(1280);
BENCHMARK(BM_Blur<true>)->Name("blur/parallel")->Arg(640)->Arg(1280);
BENCHMARK(BM_Warp<false>)->Name("warp/serial")->Arg(640)->Arg(1280);
BENCHMARK(BM_Warp<true>)->Name("warp/parallel")->Arg(640)->Arg(1280);
BENCHMARK(BM_Darken<false>)->Name("darken/serial")->Arg(640)->Arg(1280);
BENCHMARK(BM_Darken<true>)->Name("darken/parallel")->Arg(640)->Arg(1280);

BENCHMARK_MAIN();
