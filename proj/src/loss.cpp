#include "crowdforge/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crowdforge/errors.hpp"
#include "crowdforge/seeding.hpp"

namespace crowdforge::loss {

NoiseResidualClip::NoiseResidualClip(std::size_t frames, std::size_t elements_per_frame)
    : NoiseResidualClip(frames, elements_per_frame, std::vector<double>(frames * elements_per_frame, 0.0),
                        std::vector<double>(frames * elements_per_frame, 0.0)) {}

NoiseResidualClip::NoiseResidualClip(std::size_t frames, std::size_t elements_per_frame,
                                     std::vector<double> predicted, std::vector<double> target)
    : frames_(frames), elements_(elements_per_frame), predicted_(std::move(predicted)), target_(std::move(target)) {
  if (frames_ < 1 || elements_ < 1) throw ShapeError("noise clip needs at least one frame and one element");
  if (predicted_.size() != frames_ * elements_ || target_.size() != frames_ * elements_) {
    throw ShapeError("noise clip: predicted/target sizes do not match " + std::to_string(frames_) + "x" +
                     std::to_string(elements_));
  }
}

void LossConfig::validate() const {
  if (!(motion_ratio >= 0.0 && motion_ratio <= 1.0)) throw ConfigError("motion sub-loss ratio must lie in [0, 1]");
}

double base_loss(const NoiseResidualClip& clip) {
  const std::size_t n = clip.elements();
  double total = 0.0;
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    const auto p = clip.predicted_frame(t);
    const auto g = clip.target_frame(t);
    double frame = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = p[i] - g[i];
      frame += d * d;
    }
    total += frame / static_cast<double>(n);
  }
  return total / static_cast<double>(clip.frames());
}

double motion_sub_loss(const NoiseResidualClip& clip) {
  if (clip.frames() < 2) return 0.0;
  const std::size_t n = clip.elements();
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < clip.frames(); ++t) {
    const auto p0 = clip.predicted_frame(t);
    const auto p1 = clip.predicted_frame(t + 1);
    const auto g0 = clip.target_frame(t);
    const auto g1 = clip.target_frame(t + 1);
    double frame = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (p1[i] - p0[i]) - (g1[i] - g0[i]);
      frame += d * d;
    }
    total += frame / static_cast<double>(n);
  }
  return total / static_cast<double>(clip.frames() - 1);
}

double combined_loss(const NoiseResidualClip& clip, const LossConfig& cfg) {
  cfg.validate();
  const double r = cfg.motion_ratio;
  if (r == 0.0) return base_loss(clip);
  if (r == 1.0) return motion_sub_loss(clip);
  return (1.0 - r) * base_loss(clip) + r * motion_sub_loss(clip);
}

std::vector<double> combined_loss_gradient(const NoiseResidualClip& clip, const LossConfig& cfg) {
  cfg.validate();
  const std::size_t T = clip.frames();
  const std::size_t n = clip.elements();
  const double r = cfg.motion_ratio;
  std::vector<double> grad(T * n, 0.0);
  const auto p = clip.predicted();
  const auto g = clip.target();

  const double base_scale = (1.0 - r) * 2.0 / (static_cast<double>(T) * static_cast<double>(n));
  for (std::size_t k = 0; k < T * n; ++k) grad[k] = base_scale * (p[k] - g[k]);

  if (T >= 2 && r != 0.0) {
    const double sub_scale = r * 2.0 / (static_cast<double>(T - 1) * static_cast<double>(n));
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = t * n + i;
        const std::size_t b = (t + 1) * n + i;
        const double d = (p[b] - p[a]) - (g[b] - g[a]);
        grad[b] += sub_scale * d;
        grad[a] -= sub_scale * d;
      }
    }
  }
  return grad;
}

GradCheckResult finite_diff_grad_check(const NoiseResidualClip& clip, const LossConfig& cfg, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  const auto analytic = combined_loss_gradient(clip, cfg);
  NoiseResidualClip probe = clip;
  auto x = probe.predicted();
  GradCheckResult result;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = combined_loss(probe, cfg);
    x[k] = saved - h;
    const double down = combined_loss(probe, cfg);
    x[k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double abs_err = std::abs(numeric - analytic[k]);
    const double rel = abs_err / std::max({std::abs(numeric), std::abs(analytic[k]), 1e-8});
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = k;
    }
  }
  return result;
}

GradCheckSummary run_grad_check_trials(int trials, double h, std::uint64_t seed, const LossConfig& cfg,
                                       double tolerance) {
  static constexpr std::size_t kFrameCounts[] = {1, 2, 3, 8};
  GradCheckSummary summary;
  summary.tolerance = tolerance;
  SeededRng rng(seed);
  for (int i = 0; i < trials; ++i) {
    const std::size_t T = kFrameCounts[static_cast<std::size_t>(i) % 4];
    const std::size_t n = 1 + rng.index(16);
    std::vector<double> pred(T * n), target(T * n);
    for (auto& v : pred) v = rng.uniform(-2.0, 2.0);
    for (auto& v : target) v = rng.uniform(-2.0, 2.0);
    NoiseResidualClip clip(T, n, std::move(pred), std::move(target));
    const auto r = finite_diff_grad_check(clip, cfg, h);
    ++summary.trials;
    summary.worst_rel_error = std::max(summary.worst_rel_error, r.max_rel_error);
    if (!(r.max_rel_error < tolerance)) ++summary.failures;
  }
  return summary;
}

}  // namespace crowdforge::loss
