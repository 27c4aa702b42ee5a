#include <omp.h>

#include <algorithm>
#include <cmath>

#include "crowdforge/kernels.hpp"

namespace crowdforge::kernels::parallel {

GrayFrame to_gray(const Frame& frame) {
  GrayFrame gray(frame.width(), frame.height());
  const int h = frame.height();
  const int w = frame.width();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = frame.row(y).data();
    std::uint8_t* dst = gray.row(y).data();
    for (int x = 0; x < w; ++x) {
      const int v = 299 * src[3 * x] + 587 * src[3 * x + 1] + 114 * src[3 * x + 2];
      dst[x] = static_cast<std::uint8_t>((v + 500) / 1000);
    }
  }
  return gray;
}

std::int64_t luma_sum_milli(const Frame& frame) {
  const int h = frame.height();
  const int w = frame.width();
  std::int64_t total = 0;
  // Integer sum: associative, so a plain reduction is exact.
#pragma omp parallel for schedule(static) reduction(+ : total)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = frame.row(y).data();
    std::int64_t row = 0;
    for (int x = 0; x < w; ++x) row += 299 * src[3 * x] + 587 * src[3 * x + 1] + 114 * src[3 * x + 2];
    total += row;
  }
  return total;
}

double ssim_mean(const GrayFrame& a, const GrayFrame& b, std::span<const double> window, double c1, double c2) {
  require_same_shape(a, b, "ssim");
  const int k = static_cast<int>(window.size());
  const int w = a.width();
  const int h = a.height();
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  if (ow <= 0 || oh <= 0) throw ShapeError("ssim: frame smaller than the SSIM window");

  const std::size_t plane = static_cast<std::size_t>(h) * ow;
  std::vector<double> hx(5 * plane);
  const double* wt = window.data();

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* ra = a.row(y).data();
    const std::uint8_t* rb = b.row(y).data();
    double* o = hx.data() + static_cast<std::size_t>(y) * ow;
    for (int x = 0; x < ow; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < k; ++i) {
        const double va = ra[x + i];
        const double vb = rb[x + i];
        const double wi = wt[i];
        sa += wi * va;
        sb += wi * vb;
        saa += wi * (va * va);
        sbb += wi * (vb * vb);
        sab += wi * (va * vb);
      }
      o[x] = sa;
      o[plane + x] = sb;
      o[2 * plane + x] = saa;
      o[3 * plane + x] = sbb;
      o[4 * plane + x] = sab;
    }
  }

  std::vector<double> row_sums(static_cast<std::size_t>(oh), 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < oh; ++y) {
    double row = 0.0;
    for (int x = 0; x < ow; ++x) {
      double mu_a = 0, mu_b = 0, e_aa = 0, e_bb = 0, e_ab = 0;
      for (int i = 0; i < k; ++i) {
        const double* p = hx.data() + static_cast<std::size_t>(y + i) * ow + x;
        const double wi = wt[i];
        mu_a += wi * p[0];
        mu_b += wi * p[plane];
        e_aa += wi * p[2 * plane];
        e_bb += wi * p[3 * plane];
        e_ab += wi * p[4 * plane];
      }
      const double var_a = e_aa - mu_a * mu_a;
      const double var_b = e_bb - mu_b * mu_b;
      const double cov = e_ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      row += num / den;
    }
    row_sums[static_cast<std::size_t>(y)] = row;
  }
  double total = 0.0;
  for (double r : row_sums) total += r;
  return total / (static_cast<double>(ow) * oh);
}

ShadowFrame blur(const ShadowFrame& in, std::span<const double> weights) {
  const int w = in.width();
  const int h = in.height();
  const int r = static_cast<int>(weights.size() / 2);
  const double* wt = weights.data();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const float* src = in.row(y).data();
    double* dst = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += wt[i + r] * src[std::clamp(x + i, 0, w - 1)];
      }
      dst[x] = acc;
    }
  }

  ShadowFrame out(w, h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    float* dst = out.row(y).data();
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += wt[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      }
      dst[x] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

void warp_nearest(const Mask& src, const Affine& inverse, Mask& dst) {
  const int w = dst.width();
  const int h = dst.height();
  const int sw = src.width();
  const int sh = src.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    std::uint8_t* out = dst.row(y).data();
    for (int x = 0; x < w; ++x) {
      const Point s = inverse.apply({static_cast<double>(x), static_cast<double>(y)});
      const long long sx = nearest_index(s.x);
      const long long sy = nearest_index(s.y);
      if (sx < 0 || sy < 0 || sx >= sw || sy >= sh) continue;
      if (src(static_cast<int>(sx), static_cast<int>(sy))) out[x] = 1;
    }
  }
}

void warp_label_nearest(const LabelFrame& labels, std::uint16_t id, const Box& box, const Affine& forward,
                        Mask& dst) {
  if (box.empty()) return;
  const Affine inverse = forward.inverse();
  double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
  for (double cx : {box.x0 - 0.5, box.x1 + 0.5}) {
    for (double cy : {box.y0 - 0.5, box.y1 + 0.5}) {
      const Point p = forward.apply({cx, cy});
      min_x = std::min(min_x, p.x);
      min_y = std::min(min_y, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
  }
  if (max_x < -1.0 || max_y < -1.0 || min_x > dst.width() || min_y > dst.height()) return;
  const int x0 = static_cast<int>(std::clamp(std::floor(min_x) - 1.0, 0.0, dst.width() - 1.0));
  const int x1 = static_cast<int>(std::clamp(std::ceil(max_x) + 1.0, -1.0, dst.width() - 1.0));
  const int y0 = static_cast<int>(std::clamp(std::floor(min_y) - 1.0, 0.0, dst.height() - 1.0));
  const int y1 = static_cast<int>(std::clamp(std::ceil(max_y) + 1.0, -1.0, dst.height() - 1.0));

#pragma omp parallel for schedule(static)
  for (int y = y0; y <= y1; ++y) {
    std::uint8_t* out = dst.row(y).data();
    for (int x = x0; x <= x1; ++x) {
      const Point s = inverse.apply({static_cast<double>(x), static_cast<double>(y)});
      const long long sx = nearest_index(s.x);
      const long long sy = nearest_index(s.y);
      if (sx < box.x0 || sy < box.y0 || sx > box.x1 || sy > box.y1) continue;
      if (labels(static_cast<int>(sx), static_cast<int>(sy)) == id) out[x] = 1;
    }
  }
}

Frame darken(const Frame& bg, const ShadowFrame& shadow, double alpha) {
  require_same_shape(bg, shadow, "apply_shadow");
  Frame out(bg.width(), bg.height());
  const int w = bg.width();
  const int h = bg.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = bg.row(y).data();
    const float* s = shadow.row(y).data();
    std::uint8_t* dst = out.row(y).data();
    for (int x = 0; x < w; ++x) {
      if (s[x] == 0.0f) {
        dst[3 * x] = src[3 * x];
        dst[3 * x + 1] = src[3 * x + 1];
        dst[3 * x + 2] = src[3 * x + 2];
        continue;
      }
      const double factor = 1.0 - alpha * static_cast<double>(s[x]);
      for (int c = 0; c < 3; ++c) {
        const double v = std::round(src[3 * x + c] * factor);
        dst[3 * x + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

SquaredError squared_error(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "squared_error");
  const std::uint8_t* pa = a.data().data();
  const std::uint8_t* pb = b.data().data();
  const long long n = static_cast<long long>(a.data().size());
  std::uint64_t sum = 0;
#pragma omp parallel for schedule(static) reduction(+ : sum)
  for (long long i = 0; i < n; ++i) {
    const int d = static_cast<int>(pa[i]) - static_cast<int>(pb[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return {sum, static_cast<std::uint64_t>(n)};
}

SquaredError squared_error_masked(const Frame& a, const Frame& b, const Mask& mask) {
  require_same_shape(a, b, "squared_error");
  require_same_shape(a, mask, "squared_error");
  const int w = a.width();
  const int h = a.height();
  std::uint64_t sum = 0;
  std::uint64_t count = 0;
#pragma omp parallel for schedule(static) reduction(+ : sum, count)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* ra = a.row(y).data();
    const std::uint8_t* rb = b.row(y).data();
    const std::uint8_t* rm = mask.row(y).data();
    for (int x = 0; x < w; ++x) {
      if (!rm[x]) continue;
      for (int c = 0; c < 3; ++c) {
        const int d = static_cast<int>(ra[3 * x + c]) - static_cast<int>(rb[3 * x + c]);
        sum += static_cast<std::uint64_t>(d * d);
      }
      count += 3;
    }
  }
  return {sum, count};
}

}  // namespace crowdforge::kernels::parallel
