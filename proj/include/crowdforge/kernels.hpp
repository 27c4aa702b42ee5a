#pragma once

// Per-pixel kernels used by the pipeline stages. Every kernel has a plain
// serial reference and an OpenMP version; the two produce bit-identical
// results. Reductions are accumulated per row and summed in row order, so
// the thread count never changes a result.

#include <cstdint>
#include <span>
#include <vector>

#include "crowdforge/affine.hpp"
#include "crowdforge/image.hpp"

namespace crowdforge::kernels {

// Normalized 1-D Gaussian weights over [-radius, radius].
std::vector<double> gaussian_weights(double sigma, int radius);

struct SquaredError {
  std::uint64_t sum = 0;    // sum of squared channel differences
  std::uint64_t count = 0;  // number of channel samples included
};

// Inclusive pixel box; empty when x0 > x1.
struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const noexcept { return x0 > x1 || y0 > y1; }
};

namespace serial {

// BT.601 luma rounded to 8 bits: (299R + 587G + 114B + 500) / 1000.
GrayFrame to_gray(const Frame& frame);
// Sum over pixels of 299R + 587G + 114B (exact; divide by 1000 for luma).
std::int64_t luma_sum_milli(const Frame& frame);
// Mean of the SSIM map over all fully contained windows of the separable
// window `window` (odd length).
double ssim_mean(const GrayFrame& a, const GrayFrame& b, std::span<const double> window,
                 double c1, double c2);
// Separable convolution with clamp-to-edge borders.
ShadowFrame blur(const ShadowFrame& in, std::span<const double> weights);
// dst(x,y) |= src(round(inverse(x,y))) for every destination pixel.
void warp_nearest(const Mask& src, const Affine& inverse, Mask& dst);
// out = round(bg * (1 - alpha * s)) clamped to [0,255].
Frame darken(const Frame& bg, const ShadowFrame& shadow, double alpha);
SquaredError squared_error(const Frame& a, const Frame& b);
SquaredError squared_error_masked(const Frame& a, const Frame& b, const Mask& mask);

}  // namespace serial

namespace parallel {

GrayFrame to_gray(const Frame& frame);
std::int64_t luma_sum_milli(const Frame& frame);
double ssim_mean(const GrayFrame& a, const GrayFrame& b, std::span<const double> window,
                 double c1, double c2);
ShadowFrame blur(const ShadowFrame& in, std::span<const double> weights);
void warp_nearest(const Mask& src, const Affine& inverse, Mask& dst);
// Warps only the pixels of `labels` equal to `id`, whose bounding box is
// `source_box`; destination pixels outside the forward image of the box are
// not visited.
void warp_label_nearest(const LabelFrame& labels, std::uint16_t id, const Box& source_box, const Affine& forward,
                        Mask& dst);
Frame darken(const Frame& bg, const ShadowFrame& shadow, double alpha);
SquaredError squared_error(const Frame& a, const Frame& b);
SquaredError squared_error_masked(const Frame& a, const Frame& b, const Mask& mask);

}  // namespace parallel

// Nearest-neighbour index used by both warp variants: floor(v + 0.5).
long long nearest_index(double v) noexcept;

}  // namespace crowdforge::kernels
