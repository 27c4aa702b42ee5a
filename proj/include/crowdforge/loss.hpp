#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace crowdforge::loss {

// Predicted and ground-truth noise for T frames of N elements each, stored
// frame-major.
class NoiseResidualClip {
 public:
  NoiseResidualClip(std::size_t frames, std::size_t elements_per_frame);
  NoiseResidualClip(std::size_t frames, std::size_t elements_per_frame, std::vector<double> predicted,
                    std::vector<double> target);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t elements() const noexcept { return elements_; }

  std::span<double> predicted() noexcept { return predicted_; }
  std::span<const double> predicted() const noexcept { return predicted_; }
  std::span<double> target() noexcept { return target_; }
  std::span<const double> target() const noexcept { return target_; }

  std::span<const double> predicted_frame(std::size_t t) const { return predicted().subspan(t * elements_, elements_); }
  std::span<const double> target_frame(std::size_t t) const { return target().subspan(t * elements_, elements_); }

 private:
  std::size_t frames_;
  std::size_t elements_;
  std::vector<double> predicted_;
  std::vector<double> target_;
};

struct LossConfig {
  double motion_ratio = 0.25;  // weight of the temporal sub-loss
  void validate() const;
};

// Frame mean of per-element mean squared error between predicted and target noise.
double base_loss(const NoiseResidualClip& clip);
// Mean over adjacent pairs of the per-element mean squared difference
// between predicted and target temporal derivatives. Zero for one frame.
double motion_sub_loss(const NoiseResidualClip& clip);
// (1 - r) * base + r * sub
double combined_loss(const NoiseResidualClip& clip, const LossConfig& cfg);

// Closed-form gradient of combined_loss with respect to the predicted noise.
std::vector<double> combined_loss_gradient(const NoiseResidualClip& clip, const LossConfig& cfg);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

// Central differences against combined_loss_gradient. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckResult finite_diff_grad_check(const NoiseResidualClip& clip, const LossConfig& cfg, double h);

struct GradCheckSummary {
  int trials = 0;
  int failures = 0;
  double worst_rel_error = 0.0;
  double tolerance = 1e-4;
};

// Random clips with T cycling through {1, 2, 3, 8}.
GradCheckSummary run_grad_check_trials(int trials, double h, std::uint64_t seed, const LossConfig& cfg,
                                       double tolerance = 1e-4);

}  // namespace crowdforge::loss
