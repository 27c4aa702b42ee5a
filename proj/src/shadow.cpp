#include "crowdforge/shadow.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "crowdforge/seeding.hpp"

namespace crowdforge {

void ShadowSamplerConfig::validate() const {
  auto range = [](double lo, double hi, const char* name) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi)) {
      throw ConfigError(std::string("invalid shadow sampler range for ") + name);
    }
  };
  range(theta_min, theta_max, "theta");
  range(shear_min, shear_max, "shear");
  range(scale_min, scale_max, "scale");
  range(alpha_min, alpha_max, "alpha");
  if (theta_min < 0.0 || theta_max > 180.0) throw ConfigError("theta range must lie within [0, 180]");
  if (scale_min <= 0.0) throw ConfigError("vertical scale must be positive");
  if (alpha_min < 0.0 || alpha_max > 1.0) throw ConfigError("shadow strength must lie within [0, 1]");
  if (!(sigma_min > 0.0) || sigma_fraction < 0.0) throw ConfigError("invalid shadow sigma policy");
}

void ShadowSamplerConfig::check(const ShadowParams& p) const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  const bool theta_ok =
      theta_min == theta_max ? p.theta == theta_min : (p.theta >= theta_min && p.theta < theta_max);
  if (!theta_ok) throw ValidationError("shadow theta out of range");
  if (!in(p.shear_x, shear_min, shear_max)) throw ValidationError("shadow shear out of range");
  if (!in(p.scale_y, scale_min, scale_max)) throw ValidationError("shadow scale out of range");
  if (!in(p.alpha, alpha_min, alpha_max)) throw ValidationError("shadow strength out of range");
  if (!(p.sigma > 0.0)) throw ValidationError("shadow sigma must be positive");
}

double shadow_sigma(int frame_height, const ShadowSamplerConfig& cfg) {
  return std::max(cfg.sigma_min, cfg.sigma_fraction * static_cast<double>(frame_height));
}

ShadowParams sample_shadow_params(std::uint64_t clip_seed, const ShadowSamplerConfig& cfg, int frame_height) {
  SeededRng rng(clip_seed);
  ShadowParams p;
  p.theta = rng.uniform(cfg.theta_min, cfg.theta_max);
  p.shear_x = rng.uniform(cfg.shear_min, cfg.shear_max);
  p.scale_y = rng.uniform(cfg.scale_min, cfg.scale_max);
  p.alpha = rng.uniform(cfg.alpha_min, cfg.alpha_max);
  p.sigma = shadow_sigma(frame_height, cfg);
  return p;
}

Point estimate_pivot(const Mask& mask) {
  for (int y = mask.height() - 1; y >= 0; --y) {
    long long sum = 0;
    long long count = 0;
    const auto row = mask.row(y);
    for (int x = 0; x < mask.width(); ++x) {
      if (row[static_cast<std::size_t>(x)]) {
        sum += x;
        ++count;
      }
    }
    if (count > 0) return {static_cast<double>(sum) / static_cast<double>(count), static_cast<double>(y)};
  }
  throw EmptyInputError("estimate_pivot: mask is empty");
}

bool shadow_flipped(double theta) noexcept { return theta >= 90.0; }

double shadow_rotation_degrees(double theta) noexcept { return shadow_flipped(theta) ? theta - 180.0 : theta; }

Affine build_shadow_affine(const ShadowParams& params, Point pivot) {
  const Affine shear = Affine::linear(1.0, params.shear_x, 0.0, 1.0);
  const Affine scale = Affine::linear(1.0, 0.0, 0.0, params.scale_y);
  const Affine flip = shadow_flipped(params.theta) ? Affine::linear(-1.0, 0.0, 0.0, 1.0) : Affine::identity();
  const Affine rotation =
      params.theta == 0.0 ? Affine::identity() : Affine::rotation_degrees(shadow_rotation_degrees(params.theta));
  const Affine linear = rotation * shear * scale * flip;
  // Pivot-anchored: translation chosen so that linear(pivot) + t == pivot.
  const Point moved = linear.apply(pivot);
  Affine m = linear;
  m.tx = pivot.x - moved.x;
  m.ty = pivot.y - moved.y;
  return m;
}

Mask warp_mask(const Mask& mask, const Affine& transform) {
  Mask out(mask.width(), mask.height());
  kernels::parallel::warp_nearest(mask, transform.inverse(), out);
  return out;
}

ShadowFrame soften(const Mask& shadow, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("soften: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto weights = kernels::gaussian_weights(sigma, radius);
  ShadowFrame in(shadow.width(), shadow.height());
  auto src = shadow.data();
  auto dst = in.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1.0f : 0.0f;
  return kernels::parallel::blur(in, weights);
}

std::map<std::uint16_t, InstanceGeometry> instance_geometry(const LabelFrame& labels) {
  struct Acc {
    kernels::Box box{1 << 30, 1 << 30, -1, -1};
    int bottom = -1;
    long long sum = 0;
    long long count = 0;
  };
  std::map<std::uint16_t, Acc> acc;
  for (int y = 0; y < labels.height(); ++y) {
    const auto row = labels.row(y);
    for (int x = 0; x < labels.width(); ++x) {
      const std::uint16_t id = row[static_cast<std::size_t>(x)];
      if (id == 0) continue;
      Acc& a = acc[id];
      a.box.x0 = std::min(a.box.x0, x);
      a.box.x1 = std::max(a.box.x1, x);
      a.box.y0 = std::min(a.box.y0, y);
      a.box.y1 = std::max(a.box.y1, y);
      if (y > a.bottom) {
        a.bottom = y;
        a.sum = 0;
        a.count = 0;
      }
      a.sum += x;
      ++a.count;
    }
  }
  std::map<std::uint16_t, InstanceGeometry> out;
  for (const auto& [id, a] : acc) {
    out[id] = {a.box, {static_cast<double>(a.sum) / static_cast<double>(a.count), static_cast<double>(a.bottom)}};
  }
  return out;
}

ShadowFrame render_frame_shadow(const LabelFrame& labels, const ShadowParams& params) {
  Mask hard(labels.width(), labels.height());
  for (const auto& [id, geom] : instance_geometry(labels)) {
    const Affine m = build_shadow_affine(params, geom.pivot);
    // Binary maps: OR-ing into `hard` is the per-pixel max.
    kernels::parallel::warp_label_nearest(labels, id, geom.box, m, hard);
  }
  return soften(hard, params.sigma);
}

std::vector<ShadowFrame> render_clip_shadows(const InstanceMaskSequence& masks, const ShadowParams& params) {
  const int n = static_cast<int>(masks.frame_count());
  std::vector<ShadowFrame> out(masks.frame_count());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < n; ++t) {
    try {
      out[static_cast<std::size_t>(t)] = render_frame_shadow(masks.frame(static_cast<std::size_t>(t)), params);
    } catch (...) {
#pragma omp critical(crowdforge_shadow_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace crowdforge
