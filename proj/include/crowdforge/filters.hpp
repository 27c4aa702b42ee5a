#pragma once

#include <array>
#include <utility>
#include <vector>

#include "crowdforge/clip_model.hpp"

namespace crowdforge {

struct FilterConfig {
  double y_min = 50.0;
  double y_max = 200.0;
  double ssim_cut = 0.3;
  double hist_corr_cut = 0.5;
  int max_people = 5;  // P
  double tolerance = 0.10;  // tau

  void validate() const;
  bool operator==(const FilterConfig&) const = default;
};

// 256-bin grayscale histogram normalized to sum 1.
using Histogram = std::array<double, 256>;

struct FilterVerdict {
  double mean_luminance = 0.0;
  bool luminance_passed = false;
  std::vector<int> transition_indices;
  bool transitions_passed = false;
  double person_violation_fraction = 0.0;
  bool person_passed = false;
  bool passed = false;

  bool operator==(const FilterVerdict&) const = default;
};

// SSIM constants for 8-bit data.
inline constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);
inline constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

GrayFrame to_gray(const Frame& frame);

// Mean BT.601 luma over every pixel of every frame.
double mean_luminance(const FrameSequence& seq);
bool luminance_pass(double y_bar, const FilterConfig& cfg);

// Gaussian-window SSIM on the grayscale conversion, averaged over all fully
// contained 11x11 windows. Frames smaller than the window are a ShapeError.
double ssim(const Frame& a, const Frame& b);
double ssim(const GrayFrame& a, const GrayFrame& b);

Histogram gray_histogram(const GrayFrame& gray);
// Pearson correlation between normalized grayscale histograms. When either
// histogram has zero variance the result is 1 for equal histograms, else 0.
double histogram_correlation(const Frame& a, const Frame& b);
double histogram_correlation(const Histogram& a, const Histogram& b);

// Indices t where SSIM(I_t, I_t+1) < ssim_cut or rho(H_t, H_t+1) < hist_corr_cut.
std::vector<int> detect_scene_transitions(const FrameSequence& seq, const FilterConfig& cfg);

// {pass, fraction}: fraction of frames with count > P; pass iff fraction < tau.
std::pair<bool, double> person_count_pass(const std::vector<int>& counts, const FilterConfig& cfg);

// Runs every admission test on a background clip.
FilterVerdict evaluate_background(const FrameSequence& seq, const std::vector<int>& person_counts,
                                  const FilterConfig& cfg);

}  // namespace crowdforge
