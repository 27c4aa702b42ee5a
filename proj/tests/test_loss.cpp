#include <gtest/gtest.h>

#include <cmath>

#include "crowdforge/errors.hpp"
#include "crowdforge/loss.hpp"
#include "crowdforge/seeding.hpp"

using namespace crowdforge;
using namespace crowdforge::loss;

namespace {

NoiseResidualClip random_clip(SeededRng& rng, std::size_t T, std::size_t n) {
  std::vector<double> p(T * n), g(T * n);
  for (auto& v : p) v = rng.uniform(-3, 3);
  for (auto& v : g) v = rng.uniform(-3, 3);
  return NoiseResidualClip(T, n, p, g);
}

// Works on the residual d = pred - target directly, frame by frame.
struct Oracle {
  double base = 0;
  double sub = 0;
};

Oracle oracle_loss(const NoiseResidualClip& c) {
  const std::size_t T = c.frames(), n = c.elements();
  std::vector<std::vector<double>> d(T, std::vector<double>(n));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) d[t][i] = c.predicted()[t * n + i] - c.target()[t * n + i];
  }
  Oracle o;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) o.base += d[t][i] * d[t][i];
  }
  o.base /= static_cast<double>(T * n);
  if (T > 1) {
    for (std::size_t t = 1; t < T; ++t) {
      for (std::size_t i = 0; i < n; ++i) o.sub += (d[t][i] - d[t - 1][i]) * (d[t][i] - d[t - 1][i]);
    }
    o.sub /= static_cast<double>((T - 1) * n);
  }
  return o;
}

LossConfig ratio(double r) {
  LossConfig c;
  c.motion_ratio = r;
  return c;
}

}  // namespace

TEST(Loss, ZeroWhenPredictionMatches) {
  SeededRng rng(51);
  auto c = random_clip(rng, 4, 6);
  std::copy(c.target().begin(), c.target().end(), c.predicted().begin());
  EXPECT_EQ(base_loss(c), 0.0);
  EXPECT_EQ(motion_sub_loss(c), 0.0);
  EXPECT_EQ(combined_loss(c, LossConfig{}), 0.0);
}

TEST(Loss, ConstantResidualHasNoMotionTerm) {
  // Same offset on every frame: the temporal derivatives agree exactly.
  SeededRng rng(52);
  auto c = random_clip(rng, 5, 3);
  for (std::size_t k = 0; k < c.predicted().size(); ++k) c.predicted()[k] = c.target()[k] + 0.5;
  EXPECT_EQ(motion_sub_loss(c), 0.0);
  EXPECT_EQ(base_loss(c), 0.25);
}

TEST(Loss, SingleFrameConvention) {
  NoiseResidualClip c(1, 2, {1, 1}, {0, 0});
  EXPECT_EQ(base_loss(c), 1.0);
  EXPECT_EQ(motion_sub_loss(c), 0.0);
  EXPECT_EQ(combined_loss(c, ratio(0.0)), 1.0);
  EXPECT_EQ(combined_loss(c, ratio(0.25)), 0.75);
}

TEST(Loss, MatchesOracle) {
  SeededRng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + rng.index(9);
    const std::size_t n = 1 + rng.index(20);
    const auto c = random_clip(rng, T, n);
    const auto o = oracle_loss(c);
    EXPECT_NEAR(base_loss(c), o.base, 1e-12);
    EXPECT_NEAR(motion_sub_loss(c), o.sub, 1e-12);
    const double r = rng.unit();
    EXPECT_NEAR(combined_loss(c, ratio(r)), (1 - r) * o.base + r * o.sub, 1e-12);
  }
}

TEST(Loss, DyadicOffsetInvariance) {
  // Shifting prediction and target by the same dyadic constant changes no bit.
  SeededRng rng(54);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(12), g(12);
    for (auto& v : p) v = static_cast<double>(static_cast<int>(rng.index(64)) - 32) / 8.0;
    for (auto& v : g) v = static_cast<double>(static_cast<int>(rng.index(64)) - 32) / 8.0;
    const NoiseResidualClip a(3, 4, p, g);
    for (auto& v : p) v += 0.5;
    for (auto& v : g) v += 0.5;
    const NoiseResidualClip b(3, 4, p, g);
    EXPECT_EQ(combined_loss(a, LossConfig{}), combined_loss(b, LossConfig{}));
  }
}

TEST(Loss, RatioEndpointsAreExact) {
  SeededRng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_clip(rng, 1 + rng.index(6), 1 + rng.index(8));
    EXPECT_EQ(combined_loss(c, ratio(0)), base_loss(c));
    EXPECT_EQ(combined_loss(c, ratio(1)), motion_sub_loss(c));
  }
}

TEST(Loss, QuarterRatioClosedForm) {
  // Residual [a, a + s] with s^2 = 0.4 and a^2 + (a + s)^2 = 1.6 gives
  // base 0.8, sub 0.4, so the default mix is 0.75 * 0.8 + 0.25 * 0.4.
  const double s = std::sqrt(0.4);
  const double a = (-s + std::sqrt(2.8)) / 2;
  const NoiseResidualClip c(2, 1, {a, a + s}, {0, 0});
  EXPECT_NEAR(base_loss(c), 0.8, 1e-12);
  EXPECT_NEAR(motion_sub_loss(c), 0.4, 1e-12);
  EXPECT_NEAR(combined_loss(c, LossConfig{}), 0.7, 1e-12);
}

TEST(Loss, AffineInRatio) {
  SeededRng rng(56);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_clip(rng, 4, 5);
    const double r1 = rng.unit(), r2 = rng.unit(), lam = rng.unit();
    const double mixed = combined_loss(c, ratio(lam * r1 + (1 - lam) * r2));
    EXPECT_NEAR(mixed, lam * combined_loss(c, ratio(r1)) + (1 - lam) * combined_loss(c, ratio(r2)), 1e-12);
  }
}

TEST(Loss, ConfigAndShapeErrors) {
  EXPECT_THROW(ratio(-0.1).validate(), ConfigError);
  EXPECT_THROW(ratio(1.1).validate(), ConfigError);
  EXPECT_THROW(NoiseResidualClip(0, 3), ShapeError);
  EXPECT_THROW(NoiseResidualClip(2, 2, {1, 2, 3}, {1, 2, 3, 4}), ShapeError);
}

TEST(LossGradient, BaseOnlyClosedForm) {
  SeededRng rng(57);
  const auto c = random_clip(rng, 3, 4);
  const auto g = combined_loss_gradient(c, ratio(0));
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(g[k], 2 * (c.predicted()[k] - c.target()[k]) / 12.0, 1e-15);
  }
}

TEST(LossGradient, MatchesCentralDifferences) {
  SeededRng rng(58);
  for (double r : {0.0, 0.25, 0.6, 1.0}) {
    for (std::size_t T : {1u, 2u, 3u, 8u}) {
      const auto c = random_clip(rng, T, 1 + rng.index(10));
      const auto res = finite_diff_grad_check(c, ratio(r), 1e-5);
      EXPECT_LT(res.max_rel_error, 1e-6) << "r=" << r << " T=" << T;
    }
  }
}

TEST(LossGradient, TrialRunner) {
  const auto s = run_grad_check_trials(40, 1e-5, 9, LossConfig{});
  EXPECT_EQ(s.trials, 40);
  EXPECT_EQ(s.failures, 0);
  EXPECT_LT(s.worst_rel_error, 1e-4);
  EXPECT_THROW(finite_diff_grad_check(NoiseResidualClip(1, 1), LossConfig{}, 0.0), ConfigError);
}
