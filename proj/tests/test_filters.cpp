#include <gtest/gtest.h>

#include <numeric>

#include "crowdforge/errors.hpp"
#include "crowdforge/filters.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace crowdforge;

namespace {

FrameSequence constant_clip(int frames, std::uint8_t v, int w = 16, int h = 16) {
  return gen::sequence(std::vector<Frame>(static_cast<std::size_t>(frames), Frame(w, h, v)));
}

// Black-to-white fade over `frames` frames on a fixed texture. A flat fade
// would move the single occupied histogram bin every step and correlate at
// -1/255; the texture keeps adjacent histograms overlapping.
FrameSequence textured_fade(int frames, int w = 32, int h = 32) {
  SeededRng rng(99);
  std::vector<int> texture(static_cast<std::size_t>(w * h));
  for (auto& v : texture) v = gen::uniform_int(rng, -16, 16);
  std::vector<Frame> out;
  for (int t = 0; t < frames; ++t) {
    const long base = std::lround(255.0 * t / (frames - 1));
    Frame f(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto v = static_cast<std::uint8_t>(std::clamp<long>(base + texture[static_cast<std::size_t>(y * w + x)], 0, 255));
        f(x, y, 0) = f(x, y, 1) = f(x, y, 2) = v;
      }
    }
    out.push_back(f);
  }
  return gen::sequence(out);
}

}  // namespace

TEST(MeanLuminance, ClosedForms) {
  EXPECT_EQ(mean_luminance(constant_clip(3, 0)), 0.0);
  EXPECT_NEAR(mean_luminance(constant_clip(3, 255)), 255.0, 0.5);
  EXPECT_EQ(mean_luminance(constant_clip(3, 128)), 128.0);
}

TEST(MeanLuminance, MatchesOracle) {
  SeededRng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Frame> frames;
    for (int t = 0; t < 3; ++t) frames.push_back(gen::random_frame(rng, 13, 7));
    EXPECT_NEAR(mean_luminance(gen::sequence(frames)), oracle::mean_luminance(frames), 1e-9);
  }
}

TEST(LuminancePass, InclusiveBounds) {
  FilterConfig cfg;
  EXPECT_TRUE(luminance_pass(50.0, cfg));
  EXPECT_FALSE(luminance_pass(49.999, cfg));
  EXPECT_TRUE(luminance_pass(200.0, cfg));
  EXPECT_FALSE(luminance_pass(200.001, cfg));
  EXPECT_TRUE(luminance_pass(128.0, cfg));
}

TEST(LuminancePass, MonotoneOutsideInterval) {
  FilterConfig cfg;
  for (double y = 0; y <= 255; y += 0.25) {
    EXPECT_EQ(luminance_pass(y, cfg), y >= 50 && y <= 200) << y;
  }
}

TEST(Ssim, Identity) {
  SeededRng rng(2);
  const Frame f = gen::random_frame(rng, 32, 32);
  EXPECT_EQ(ssim(f, f), 1.0);
}

TEST(Ssim, ConstantBlackVsWhiteClosedForm) {
  const double expected = kSsimC1 / (255.0 * 255.0 + kSsimC1);
  EXPECT_NEAR(ssim(Frame(16, 16, 0), Frame(16, 16, 255)), expected, 1e-12);
}

TEST(Ssim, MatchesBruteForceOracleAndIsSymmetric) {
  SeededRng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Frame a = gen::random_frame(rng, 32, 32);
    const Frame b = trial % 2 ? gen::random_frame(rng, 32, 32) : gen::textured_frame(rng, 32, 32);
    const double got = ssim(a, b);
    EXPECT_NEAR(got, oracle::ssim(oracle::gray(a), oracle::gray(b)), 1e-6);
    EXPECT_EQ(got, ssim(b, a));
  }
}

TEST(Ssim, TooSmallIsShapeError) {
  EXPECT_THROW(ssim(Frame(10, 20), Frame(10, 20)), ShapeError);
  EXPECT_THROW(ssim(Frame(12, 12), Frame(13, 12)), ShapeError);
}

TEST(HistogramCorrelation, IdentityAndPermutation) {
  SeededRng rng(4);
  Frame f = gen::random_frame(rng, 24, 24);
  EXPECT_EQ(histogram_correlation(f, f), 1.0);
  Frame shuffled = f;
  // Fisher-Yates over pixels keeps every RGB triple intact.
  for (int i = static_cast<int>(f.pixel_count()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.index(static_cast<std::uint64_t>(i + 1)));
    for (int c = 0; c < 3; ++c) std::swap(shuffled.data()[i * 3 + c], shuffled.data()[j * 3 + c]);
  }
  EXPECT_NEAR(histogram_correlation(f, shuffled), 1.0, 1e-12);
}

TEST(HistogramCorrelation, BlackVsWhite) {
  const double got = histogram_correlation(Frame(8, 8, 0), Frame(8, 8, 255));
  EXPECT_NEAR(got, oracle::histogram_correlation(GrayFrame(8, 8, 0), GrayFrame(8, 8, 255)), 1e-12);
  EXPECT_NEAR(got, -1.0 / 255.0, 1e-12);
}

TEST(HistogramCorrelation, MatchesOracleAndIsSymmetric) {
  SeededRng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Frame a = gen::random_frame(rng, 32, 32);
    const Frame b = gen::textured_frame(rng, 32, 32, 60 + trial * 4);
    const double got = histogram_correlation(a, b);
    EXPECT_NEAR(got, oracle::histogram_correlation(oracle::gray(a), oracle::gray(b)), 1e-6);
    EXPECT_EQ(got, histogram_correlation(b, a));
  }
}

TEST(HistogramCorrelation, ZeroVarianceConvention) {
  Histogram flat{};
  flat.fill(1.0 / 256.0);
  Histogram other{};
  other[3] = 1.0;
  EXPECT_EQ(histogram_correlation(flat, flat), 1.0);
  EXPECT_EQ(histogram_correlation(flat, other), 0.0);
}

TEST(SceneTransitions, IdenticalFramesHaveNone) {
  SeededRng rng(6);
  const Frame f = gen::textured_frame(rng, 32, 32);
  EXPECT_TRUE(detect_scene_transitions(gen::sequence({f, f, f, f}), FilterConfig{}).empty());
}

TEST(SceneTransitions, HardCutAfterFrameNine) {
  std::vector<Frame> frames(10, Frame(16, 16, 0));
  frames.resize(20, Frame(16, 16, 255));
  EXPECT_EQ(detect_scene_transitions(gen::sequence(frames), FilterConfig{}), (std::vector<int>{9}));
}

TEST(SceneTransitions, TexturedGradualFadePasses) {
  const auto fade = textured_fade(197);
  FilterConfig cfg;
  EXPECT_TRUE(detect_scene_transitions(fade, cfg).empty());
  // Each adjacent pair clears both cuts with margin.
  for (std::size_t t = 0; t + 1 < fade.size(); ++t) {
    EXPECT_GT(ssim(fade.frames[t], fade.frames[t + 1]), cfg.ssim_cut);
    EXPECT_GT(histogram_correlation(fade.frames[t], fade.frames[t + 1]), cfg.hist_corr_cut);
  }
}

TEST(SceneTransitions, FlatFadeTripsHistogramCut) {
  // Documented limitation: a texture-free fade shifts every pixel to a new
  // bin, so the histogram test alone flags it.
  std::vector<Frame> frames;
  for (int t = 0; t < 20; ++t) frames.push_back(Frame(16, 16, static_cast<std::uint8_t>(t * 13)));
  EXPECT_EQ(detect_scene_transitions(gen::sequence(frames), FilterConfig{}).size(), 19u);
}

TEST(SceneTransitions, JunctionOfTwoStaticClipsIsFlaggedExactly) {
  SeededRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int a_len = gen::uniform_int(rng, 1, 8);
    const int b_len = gen::uniform_int(rng, 1, 8);
    const auto lo = static_cast<std::uint8_t>(gen::uniform_int(rng, 0, 100));
    const auto hi = static_cast<std::uint8_t>(lo + gen::uniform_int(rng, 120, 155));
    std::vector<Frame> frames(static_cast<std::size_t>(a_len), Frame(12, 12, lo));
    frames.resize(static_cast<std::size_t>(a_len + b_len), Frame(12, 12, hi));
    EXPECT_EQ(detect_scene_transitions(gen::sequence(frames), FilterConfig{}), (std::vector<int>{a_len - 1}));
  }
}

TEST(PersonCount, BoundaryAt197Frames) {
  FilterConfig cfg;
  std::vector<int> counts(197, 3);
  std::fill(counts.begin(), counts.begin() + 19, 6);
  auto [pass19, frac19] = person_count_pass(counts, cfg);
  EXPECT_TRUE(pass19);
  EXPECT_EQ(frac19, 19.0 / 197.0);
  counts[19] = 6;
  auto [pass20, frac20] = person_count_pass(counts, cfg);
  EXPECT_FALSE(pass20);
  EXPECT_EQ(frac20, 20.0 / 197.0);
}

TEST(PersonCount, CountMustExceedP) {
  auto [pass, frac] = person_count_pass(std::vector<int>(197, 5), FilterConfig{});
  EXPECT_TRUE(pass);
  EXPECT_EQ(frac, 0.0);
}

TEST(PersonCount, Errors) {
  EXPECT_THROW(person_count_pass({}, FilterConfig{}), EmptyInputError);
  EXPECT_THROW(person_count_pass({1, -1}, FilterConfig{}), ValidationError);
}

TEST(PersonCount, MonotoneUnderRaisedCounts) {
  SeededRng rng(8);
  FilterConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> counts(static_cast<std::size_t>(gen::uniform_int(rng, 1, 60)));
    for (auto& c : counts) c = gen::uniform_int(rng, 0, 8);
    const bool before = person_count_pass(counts, cfg).first;
    counts[rng.index(counts.size())] += gen::uniform_int(rng, 1, 5);
    const bool after = person_count_pass(counts, cfg).first;
    EXPECT_FALSE(!before && after);
  }
}

TEST(EvaluateBackground, CombinesAllTests) {
  SeededRng rng(9);
  std::vector<Frame> frames;
  for (int t = 0; t < 6; ++t) frames.push_back(gen::textured_frame(rng, 24, 24, 120, 3));
  const auto seq = gen::sequence(frames);
  auto v = evaluate_background(seq, std::vector<int>(6, 0), FilterConfig{});
  EXPECT_TRUE(v.passed);
  EXPECT_TRUE(v.luminance_passed && v.transitions_passed && v.person_passed);

  v = evaluate_background(seq, {0, 9, 0, 0, 0, 0}, FilterConfig{});
  EXPECT_FALSE(v.passed);
  EXPECT_FALSE(v.person_passed);
  EXPECT_THROW(evaluate_background(seq, {0, 0}, FilterConfig{}), ValidationError);
}
