#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "crowdforge/affine.hpp"
#include "crowdforge/clip_model.hpp"
#include "crowdforge/kernels.hpp"

namespace crowdforge {

// One set of shadow parameters per composite clip, shared by every frame
// and instance so lighting stays consistent.
struct ShadowParams {
  double theta = 0.0;    // direction, degrees in [0, 180)
  double shear_x = 0.0;  // horizontal shear
  double scale_y = 1.0;  // vertical scale
  double alpha = 0.5;    // darkening strength
  double sigma = 1.0;    // Gaussian softening, pixels

  bool operator==(const ShadowParams&) const = default;
};

struct ShadowSamplerConfig {
  double theta_min = 0.0;
  double theta_max = 180.0;
  double shear_min = 0.15;
  double shear_max = 0.35;
  double scale_min = 0.8;
  double scale_max = 0.95;
  double alpha_min = 0.2;
  double alpha_max = 0.8;
  // sigma = max(sigma_min, sigma_fraction * frame height)
  double sigma_fraction = 0.01;
  double sigma_min = 1.0;

  void validate() const;
  // Throws ValidationError when `p` falls outside the configured ranges.
  void check(const ShadowParams& p) const;
  bool operator==(const ShadowSamplerConfig&) const = default;
};

double shadow_sigma(int frame_height, const ShadowSamplerConfig& cfg);

// Draw order: theta, shear, scale, alpha. Deterministic in clip_seed.
ShadowParams sample_shadow_params(std::uint64_t clip_seed, const ShadowSamplerConfig& cfg, int frame_height);

// Midpoint of the lowest occupied row: y = max set row, x = mean set column
// in that row. Throws EmptyInputError on an empty mask.
Point estimate_pivot(const Mask& mask);

// Left-right flip engages at theta >= 90.
bool shadow_flipped(double theta) noexcept;
// Rotation applied after the flip: theta below 90, theta - 180 from 90 up,
// so directions on either side of vertical are reachable.
double shadow_rotation_degrees(double theta) noexcept;

// T(pivot) * R(rot) * ShearX(s_x) * Scale(1, s_y) * FlipX^b * T(-pivot).
Affine build_shadow_affine(const ShadowParams& params, Point pivot);

// Inverse-mapped nearest-neighbour rasterization onto the source grid;
// anything mapped outside the frame is clipped.
Mask warp_mask(const Mask& mask, const Affine& transform);

// Separable Gaussian blur, radius ceil(3 sigma), clamp-to-edge, output in [0,1].
ShadowFrame soften(const Mask& shadow, double sigma);

// Pivot and bounding data for every instance of one label frame.
struct InstanceGeometry {
  kernels::Box box;
  Point pivot;
};
std::map<std::uint16_t, InstanceGeometry> instance_geometry(const LabelFrame& labels);

// Per instance: pivot, affine, warp; union by per-pixel max; then soften.
ShadowFrame render_frame_shadow(const LabelFrame& labels, const ShadowParams& params);
std::vector<ShadowFrame> render_clip_shadows(const InstanceMaskSequence& masks, const ShadowParams& params);

}  // namespace crowdforge
