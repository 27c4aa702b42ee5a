// Serial reference kernels. Kept deliberately plain: the OpenMP versions in
// kernels_omp.cpp are checked against these bit for bit.

#include <algorithm>
#include <cmath>

#include "crowdforge/kernels.hpp"

namespace crowdforge::kernels::serial {

GrayFrame to_gray(const Frame& frame) {
  GrayFrame gray(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const int v = 299 * frame(x, y, 0) + 587 * frame(x, y, 1) + 114 * frame(x, y, 2);
      gray(x, y) = static_cast<std::uint8_t>((v + 500) / 1000);
    }
  }
  return gray;
}

std::int64_t luma_sum_milli(const Frame& frame) {
  std::int64_t total = 0;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      total += 299 * frame(x, y, 0) + 587 * frame(x, y, 1) + 114 * frame(x, y, 2);
    }
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

  // Horizontal pass for a, b, a^2, b^2, ab.
  const std::size_t plane = static_cast<std::size_t>(h) * ow;
  std::vector<double> hx(5 * plane);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < k; ++i) {
        const double va = a(x + i, y);
        const double vb = b(x + i, y);
        const double wi = window[static_cast<std::size_t>(i)];
        sa += wi * va;
        sb += wi * vb;
        saa += wi * (va * va);
        sbb += wi * (vb * vb);
        sab += wi * (va * vb);
      }
      const std::size_t idx = static_cast<std::size_t>(y) * ow + x;
      hx[idx] = sa;
      hx[plane + idx] = sb;
      hx[2 * plane + idx] = saa;
      hx[3 * plane + idx] = sbb;
      hx[4 * plane + idx] = sab;
    }
  }

  std::vector<double> row_sums(static_cast<std::size_t>(oh), 0.0);
  for (int y = 0; y < oh; ++y) {
    double row = 0.0;
    for (int x = 0; x < ow; ++x) {
      double mu_a = 0, mu_b = 0, e_aa = 0, e_bb = 0, e_ab = 0;
      for (int i = 0; i < k; ++i) {
        const std::size_t idx = static_cast<std::size_t>(y + i) * ow + x;
        const double wi = window[static_cast<std::size_t>(i)];
        mu_a += wi * hx[idx];
        mu_b += wi * hx[plane + idx];
        e_aa += wi * hx[2 * plane + idx];
        e_bb += wi * hx[3 * plane + idx];
        e_ab += wi * hx[4 * plane + idx];
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
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += weights[static_cast<std::size_t>(i + r)] * in(sx, y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  ShadowFrame out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += weights[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(sy) * w + x];
      }
      out(x, y) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

void warp_nearest(const Mask& src, const Affine& inverse, Mask& dst) {
  for (int y = 0; y < dst.height(); ++y) {
    for (int x = 0; x < dst.width(); ++x) {
      const Point s = inverse.apply({static_cast<double>(x), static_cast<double>(y)});
      const long long sx = nearest_index(s.x);
      const long long sy = nearest_index(s.y);
      if (sx < 0 || sy < 0 || sx >= src.width() || sy >= src.height()) continue;
      if (src(static_cast<int>(sx), static_cast<int>(sy))) dst(x, y) = 1;
    }
  }
}

Frame darken(const Frame& bg, const ShadowFrame& shadow, double alpha) {
  require_same_shape(bg, shadow, "apply_shadow");
  Frame out(bg.width(), bg.height());
  for (int y = 0; y < bg.height(); ++y) {
    for (int x = 0; x < bg.width(); ++x) {
      const double s = shadow(x, y);
      const double factor = 1.0 - alpha * s;
      for (int c = 0; c < 3; ++c) {
        if (s == 0.0f) {
          out(x, y, c) = bg(x, y, c);
          continue;
        }
        const double v = std::round(bg(x, y, c) * factor);
        out(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return out;
}

SquaredError squared_error(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "squared_error");
  SquaredError e;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const int d = static_cast<int>(da[i]) - static_cast<int>(db[i]);
    e.sum += static_cast<std::uint64_t>(d * d);
  }
  e.count = da.size();
  return e;
}

SquaredError squared_error_masked(const Frame& a, const Frame& b, const Mask& mask) {
  require_same_shape(a, b, "squared_error");
  require_same_shape(a, mask, "squared_error");
  SquaredError e;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!mask(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const int d = static_cast<int>(a(x, y, c)) - static_cast<int>(b(x, y, c));
        e.sum += static_cast<std::uint64_t>(d * d);
      }
      e.count += 3;
    }
  }
  return e;
}

}  // namespace crowdforge::kernels::serial
