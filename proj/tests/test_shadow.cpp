#include <gtest/gtest.h>

#include <cmath>

#include "crowdforge/errors.hpp"
#include "crowdforge/shadow.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace crowdforge;

namespace {

long long area(const Mask& m) {
  long long n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

ShadowParams params(double theta, double shear, double scale, double alpha = 0.5, double sigma = 1.0) {
  ShadowParams p;
  p.theta = theta;
  p.shear_x = shear;
  p.scale_y = scale;
  p.alpha = alpha;
  p.sigma = sigma;
  return p;
}

InstanceMaskSequence clip_of(std::vector<LabelFrame> frames) {
  std::map<std::uint16_t, std::string> names;
  for (const auto& f : frames) {
    for (auto v : f.data()) {
      if (v) names[v] = "person";
    }
  }
  return InstanceMaskSequence(std::move(frames), std::move(names));
}

}  // namespace

TEST(Pivot, RectangleBottomMidpoint) {
  const Mask m = gen::rect_mask(64, 32, 30, 10, 51, 21);
  EXPECT_EQ(estimate_pivot(m), (Point{40.0, 20.0}));
}

TEST(Pivot, SinglePixel) {
  Mask m(9, 9, 0);
  m(2, 7) = 1;
  EXPECT_EQ(estimate_pivot(m), (Point{2.0, 7.0}));
}

TEST(Pivot, LShapeUsesLowestRowOnly) {
  Mask m(10, 100, 0);
  for (int y = 0; y < 100; ++y) m(0, y) = m(1, y) = 1;
  for (int x = 0; x < 10; ++x) m(x, 99) = 1;
  EXPECT_EQ(estimate_pivot(m), (Point{4.5, 99.0}));
}

TEST(Pivot, EmptyMaskThrows) { EXPECT_THROW(estimate_pivot(Mask(5, 5, 0)), EmptyInputError); }

TEST(Pivot, InstanceGeometryAgreesWithEstimate) {
  SeededRng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const LabelFrame l = gen::random_labels(rng, 40, 30, 4);
    for (const auto& [id, g] : instance_geometry(l)) {
      Mask m(40, 30, 0);
      for (int y = 0; y < 30; ++y) {
        for (int x = 0; x < 40; ++x) m(x, y) = l(x, y) == id;
      }
      EXPECT_EQ(g.pivot, estimate_pivot(m));
    }
  }
}

TEST(Sampler, DeterministicPerSeed) {
  ShadowSamplerConfig cfg;
  EXPECT_EQ(sample_shadow_params(42, cfg, 480), sample_shadow_params(42, cfg, 480));
  EXPECT_NE(sample_shadow_params(42, cfg, 480), sample_shadow_params(43, cfg, 480));
}

TEST(Sampler, RangesAndMoments) {
  ShadowSamplerConfig cfg;
  double shear_sum = 0;
  double theta_lo = 180, theta_hi = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const auto p = sample_shadow_params(splitmix64(static_cast<std::uint64_t>(s)), cfg, 480);
    ASSERT_NO_THROW(cfg.check(p));
    EXPECT_GE(p.alpha, 0.2);
    EXPECT_LE(p.alpha, 0.8);
    EXPECT_GE(p.scale_y, 0.8);
    EXPECT_LE(p.scale_y, 0.95);
    shear_sum += p.shear_x;
    theta_lo = std::min(theta_lo, p.theta);
    theta_hi = std::max(theta_hi, p.theta);
  }
  EXPECT_NEAR(shear_sum / n, 0.25, 0.005);
  EXPECT_LT(theta_lo, 1.0);
  EXPECT_GT(theta_hi, 179.0);
  EXPECT_LT(theta_hi, 180.0);
}

TEST(Sampler, SigmaPolicy) {
  ShadowSamplerConfig cfg;
  EXPECT_EQ(shadow_sigma(64, cfg), 1.0);
  EXPECT_EQ(shadow_sigma(480, cfg), 4.8);
  EXPECT_EQ(sample_shadow_params(1, cfg, 1080).sigma, 10.8);
}

TEST(Sampler, CheckRejectsOutOfRange) {
  ShadowSamplerConfig cfg;
  EXPECT_THROW(cfg.check(params(180.0, 0.2, 0.9)), ValidationError);
  EXPECT_THROW(cfg.check(params(10, 0.1, 0.9)), ValidationError);
  EXPECT_THROW(cfg.check(params(10, 0.2, 0.99)), ValidationError);
  EXPECT_THROW(cfg.check(params(10, 0.2, 0.9, 0.9)), ValidationError);
  EXPECT_THROW(cfg.check(params(10, 0.2, 0.9, 0.5, 0.0)), ValidationError);
  EXPECT_NO_THROW(cfg.check(params(0, 0.15, 0.8, 0.2)));
  cfg.scale_min = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ShadowAffine, DegenerateParamsGiveIdentity) {
  const Affine m = build_shadow_affine(params(0, 0, 1), {12.5, 40});
  for (double v : {m.a - 1, m.b, m.tx, m.c, m.d - 1, m.ty}) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ShadowAffine, PivotFixedAndDeterminant) {
  ShadowSamplerConfig cfg;
  SeededRng rng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = sample_shadow_params(rng.next_u64(), cfg, 480);
    const Point pivot{rng.uniform(0, 640), rng.uniform(0, 480)};
    const Affine m = build_shadow_affine(p, pivot);
    const Point q = m.apply(pivot);
    EXPECT_NEAR(q.x, pivot.x, 1e-9);
    EXPECT_NEAR(q.y, pivot.y, 1e-9);
    EXPECT_NEAR(std::abs(m.linear_determinant()), p.scale_y, 1e-12);
    EXPECT_EQ(m.linear_determinant() < 0, p.theta >= 90.0);
  }
}

TEST(ShadowAffine, FlipEngagesAtNinety) {
  EXPECT_FALSE(shadow_flipped(89.999));
  EXPECT_TRUE(shadow_flipped(90.0));
  EXPECT_EQ(shadow_rotation_degrees(45.0), 45.0);
  EXPECT_EQ(shadow_rotation_degrees(135.0), -45.0);
  // Without shear or scale, 135 is the mirror image of 45 about the pivot column.
  const Point pivot{10, 10};
  const Affine a = build_shadow_affine(params(45, 0, 1), pivot);
  const Affine b = build_shadow_affine(params(135, 0, 1), pivot);
  EXPECT_NEAR(b.a, -a.a, 1e-12);
  EXPECT_NEAR(b.b, -a.b, 1e-12);
  EXPECT_NEAR(b.c, a.c, 1e-12);
  EXPECT_NEAR(b.d, a.d, 1e-12);
}

TEST(WarpMask, IdentityAndTranslation) {
  SeededRng rng(23);
  const Mask m = gen::random_mask(rng, 30, 20, 0.3);
  EXPECT_EQ(warp_mask(m, Affine::identity()), m);
  const Mask moved = warp_mask(m, Affine::translation(3, 2));
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 30; ++x) {
      const bool inside = x >= 3 && y >= 2;
      EXPECT_EQ(moved(x, y), inside ? m(x - 3, y - 2) : 0) << x << "," << y;
    }
  }
}

TEST(WarpMask, VerticalScaleShrinksArea) {
  const Mask m = gen::rect_mask(100, 100, 30, 20, 70, 80);
  const Affine s = build_shadow_affine(params(0, 0, 0.9), estimate_pivot(m));
  const double ratio = static_cast<double>(area(warp_mask(m, s))) / static_cast<double>(area(m));
  EXPECT_GE(ratio, 0.88);
  EXPECT_LE(ratio, 0.92);
}

TEST(WarpMask, AreaTracksDeterminantWhenUnclipped) {
  ShadowSamplerConfig cfg;
  SeededRng rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    // Rectangle centred in a large canvas so no shadow is clipped.
    const int w = gen::uniform_int(rng, 40, 100);
    const int h = gen::uniform_int(rng, 40, 100);
    const Mask m = gen::rect_mask(400, 400, 200 - w / 2, 200 - h / 2, 200 - w / 2 + w, 200 - h / 2 + h);
    const auto p = sample_shadow_params(rng.next_u64(), cfg, 400);
    const double got = static_cast<double>(area(warp_mask(m, build_shadow_affine(p, estimate_pivot(m)))));
    EXPECT_NEAR(got / (p.scale_y * area(m)), 1.0, 0.05) << trial;
  }
}

TEST(Soften, ConstantFieldsStayConstant) {
  const ShadowFrame zeros = soften(Mask(20, 15, 0), 2.0);
  for (float v : zeros.data()) EXPECT_EQ(v, 0.0f);
  const ShadowFrame ones = soften(Mask(20, 15, 1), 2.0);
  for (float v : ones.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
  EXPECT_THROW(soften(Mask(4, 4, 0), 0.0), ConfigError);
}

TEST(Soften, ImpulseResponse) {
  Mask m(41, 41, 0);
  m(20, 20) = 1;
  const double sigma = 2.0;
  const ShadowFrame s = soften(m, sigma);
  double mass = 0;
  for (float v : s.data()) mass += v;
  EXPECT_NEAR(mass, 1.0, 1e-5);
  const int r = 6;
  double norm = 0;
  for (int i = -r; i <= r; ++i) norm += std::exp(-(i * i) / (2 * sigma * sigma));
  EXPECT_NEAR(s(20, 20), 1.0 / (norm * norm), 1e-6);
  EXPECT_EQ(s(20 + r + 1, 20), 0.0f);
  EXPECT_EQ(s(20 - 3, 20), s(20 + 3, 20));
}

TEST(Soften, MatchesDirectConvolution) {
  SeededRng rng(25);
  for (double sigma : {1.0, 1.7, 3.0}) {
    const Mask m = gen::random_mask(rng, 37, 23, 0.4);
    ShadowFrame src(37, 23);
    for (std::size_t i = 0; i < m.data().size(); ++i) src.data()[i] = m.data()[i];
    const ShadowFrame got = soften(m, sigma);
    const ShadowFrame want = oracle::blur(src, sigma);
    for (std::size_t i = 0; i < got.data().size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-5);
  }
}

TEST(RenderShadows, NoInstancesNoShadow) {
  const auto shadows = render_clip_shadows(clip_of(std::vector<LabelFrame>(3, LabelFrame(16, 16, 0))),
                                           params(30, 0.2, 0.9));
  ASSERT_EQ(shadows.size(), 3u);
  for (const auto& s : shadows) {
    for (float v : s.data()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(RenderShadows, StaticInstanceGivesStaticShadow) {
  LabelFrame f(48, 48, 0);
  for (int y = 10; y < 40; ++y) {
    for (int x = 20; x < 26; ++x) f(x, y) = 1;
  }
  const auto shadows = render_clip_shadows(clip_of(std::vector<LabelFrame>(5, f)), params(60, 0.3, 0.85));
  for (const auto& s : shadows) EXPECT_EQ(s, shadows.front());
  double mass = 0;
  for (float v : shadows.front().data()) mass += v;
  EXPECT_GT(mass, 0.0);
}

TEST(RenderShadows, UnionOfPerInstanceHardShadowsThenBlur) {
  SeededRng rng(26);
  ShadowSamplerConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const LabelFrame l = gen::random_labels(rng, 50, 40, gen::uniform_int(rng, 1, 4));
    const auto p = sample_shadow_params(rng.next_u64(), cfg, 40);
    Mask hard(50, 40, 0);
    for (const auto& [id, g] : instance_geometry(l)) {
      Mask inst(50, 40, 0);
      for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 50; ++x) inst(x, y) = l(x, y) == id;
      }
      const Mask warped = warp_mask(inst, build_shadow_affine(p, estimate_pivot(inst)));
      for (std::size_t i = 0; i < hard.data().size(); ++i) hard.data()[i] = std::max(hard.data()[i], warped.data()[i]);
    }
    EXPECT_EQ(render_frame_shadow(l, p), soften(hard, p.sigma)) << trial;
  }
}
