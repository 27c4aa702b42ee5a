#include "crowdforge/filters.hpp"

#include <algorithm>
#include <cmath>

#include "crowdforge/kernels.hpp"

namespace crowdforge {
namespace {

const std::vector<double>& ssim_window() {
  static const std::vector<double> w = kernels::gaussian_weights(kSsimSigma, kSsimWindow / 2);
  return w;
}

}  // namespace

void FilterConfig::validate() const {
  if (!(0.0 <= y_min && y_min < y_max && y_max <= 255.0)) {
    throw ConfigError("luminance bounds must satisfy 0 <= y_min < y_max <= 255");
  }
  if (!(ssim_cut >= -1.0 && ssim_cut <= 1.0)) throw ConfigError("ssim cut must lie in [-1, 1]");
  if (!(hist_corr_cut >= -1.0 && hist_corr_cut <= 1.0)) {
    throw ConfigError("histogram correlation cut must lie in [-1, 1]");
  }
  if (max_people < 0) throw ConfigError("max people must be non-negative");
  if (!(tolerance >= 0.0 && tolerance <= 1.0)) throw ConfigError("tolerance must lie in [0, 1]");
}

GrayFrame to_gray(const Frame& frame) { return kernels::parallel::to_gray(frame); }

double mean_luminance(const FrameSequence& seq) {
  if (seq.frames.empty()) throw EmptyInputError("mean_luminance: empty sequence");
  std::int64_t total = 0;
  std::int64_t pixels = 0;
  for (const Frame& f : seq.frames) {
    total += kernels::parallel::luma_sum_milli(f);
    pixels += static_cast<std::int64_t>(f.pixel_count());
  }
  return static_cast<double>(total) / (1000.0 * static_cast<double>(pixels));
}

bool luminance_pass(double y_bar, const FilterConfig& cfg) { return cfg.y_min <= y_bar && y_bar <= cfg.y_max; }

double ssim(const GrayFrame& a, const GrayFrame& b) {
  require_same_shape(a, b, "ssim");
  const double v = kernels::parallel::ssim_mean(a, b, ssim_window(), kSsimC1, kSsimC2);
  return std::clamp(v, -1.0, 1.0);
}

double ssim(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "ssim");
  return ssim(to_gray(a), to_gray(b));
}

Histogram gray_histogram(const GrayFrame& gray) {
  std::array<std::uint64_t, 256> counts{};
  for (std::uint8_t v : gray.data()) ++counts[v];
  Histogram h{};
  const double n = static_cast<double>(gray.pixel_count());
  for (std::size_t i = 0; i < 256; ++i) h[i] = static_cast<double>(counts[i]) / n;
  return h;
}

double histogram_correlation(const Histogram& a, const Histogram& b) {
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= 256.0;
  mean_b /= 256.0;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    return a == b ? 1.0 : 0.0;
  }
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

double histogram_correlation(const Frame& a, const Frame& b) {
  return histogram_correlation(gray_histogram(to_gray(a)), gray_histogram(to_gray(b)));
}

std::vector<int> detect_scene_transitions(const FrameSequence& seq, const FilterConfig& cfg) {
  std::vector<int> out;
  if (seq.frames.size() < 2) return out;
  seq.validate();
  const int n = static_cast<int>(seq.frames.size());

  std::vector<GrayFrame> gray(seq.frames.size());
  std::vector<Histogram> hist(seq.frames.size());
  for (int t = 0; t < n; ++t) {
    gray[static_cast<std::size_t>(t)] = to_gray(seq.frames[static_cast<std::size_t>(t)]);
    hist[static_cast<std::size_t>(t)] = gray_histogram(gray[static_cast<std::size_t>(t)]);
  }
  std::vector<char> flagged(static_cast<std::size_t>(n - 1), 0);
  for (int t = 0; t + 1 < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double rho = histogram_correlation(hist[i], hist[i + 1]);
    if (rho < cfg.hist_corr_cut) {
      flagged[i] = 1;
      continue;
    }
    if (ssim(gray[i], gray[i + 1]) < cfg.ssim_cut) flagged[i] = 1;
  }
  for (int t = 0; t + 1 < n; ++t) {
    if (flagged[static_cast<std::size_t>(t)]) out.push_back(t);
  }
  return out;
}

std::pair<bool, double> person_count_pass(const std::vector<int>& counts, const FilterConfig& cfg) {
  if (counts.empty()) throw EmptyInputError("person_count_pass: no per-frame counts");
  std::size_t violating = 0;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    if (counts[t] < 0) {
      throw ValidationError("person count at frame " + std::to_string(t) + " is negative");
    }
    if (counts[t] > cfg.max_people) ++violating;
  }
  const double fraction = static_cast<double>(violating) / static_cast<double>(counts.size());
  return {fraction < cfg.tolerance, fraction};
}

FilterVerdict evaluate_background(const FrameSequence& seq, const std::vector<int>& person_counts,
                                  const FilterConfig& cfg) {
  cfg.validate();
  seq.validate();
  if (person_counts.size() != seq.frames.size()) {
    throw ValidationError("clip '" + seq.clip_id + "': " + std::to_string(person_counts.size()) +
                          " person counts for " + std::to_string(seq.frames.size()) + " frames");
  }
  FilterVerdict v;
  v.mean_luminance = mean_luminance(seq);
  v.luminance_passed = luminance_pass(v.mean_luminance, cfg);
  v.transition_indices = detect_scene_transitions(seq, cfg);
  v.transitions_passed = v.transition_indices.empty();
  auto [ok, fraction] = person_count_pass(person_counts, cfg);
  v.person_passed = ok;
  v.person_violation_fraction = fraction;
  v.passed = v.luminance_passed && v.transitions_passed && v.person_passed;
  return v;
}

}  // namespace crowdforge
