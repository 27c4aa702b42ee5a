#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "crowdforge/errors.hpp"
#include "crowdforge/metrics.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace crowdforge;

namespace {

FrameSequence constant_clip(int frames, std::uint8_t v, int w = 8, int h = 8) {
  return gen::sequence(std::vector<Frame>(static_cast<std::size_t>(frames), Frame(w, h, v)));
}

FrameSequence random_clip(SeededRng& rng, int frames, int w, int h) {
  std::vector<Frame> f;
  for (int t = 0; t < frames; ++t) f.push_back(gen::random_frame(rng, w, h));
  return gen::sequence(f);
}

std::string stub(const std::string& args = {}) {
  return std::string("'") + CROWDFORGE_STUB_SCORER + "' " + args;
}

std::vector<ScorerRequest> requests(std::initializer_list<const char*> ids) {
  std::vector<ScorerRequest> r;
  for (const char* id : ids) r.push_back({id, "/pred/" + std::string(id), "/gt/" + std::string(id)});
  return r;
}

ClipScore score(const std::string& id, int bin, double psnr, std::string scene = {}) {
  ClipScore s;
  s.clip_id = id;
  s.crowd_bin = bin;
  s.psnr_db = psnr;
  s.ssim = 0.9;
  s.scene = std::move(scene);
  return s;
}

}  // namespace

TEST(Psnr, ClosedForms) {
  EXPECT_TRUE(std::isinf(psnr(constant_clip(3, 90), constant_clip(3, 90))));
  EXPECT_GT(psnr(constant_clip(3, 90), constant_clip(3, 90)), 0);
  EXPECT_NEAR(psnr(constant_clip(2, 0), constant_clip(2, 255)), 0.0, 1e-12);
  EXPECT_NEAR(psnr(constant_clip(4, 128), constant_clip(4, 129)), 48.1308, 1e-3);
  EXPECT_NEAR(psnr(constant_clip(4, 128), constant_clip(4, 129)), 20 * std::log10(255.0), 1e-12);
}

TEST(Psnr, MatchesOracleSymmetricAndOffsetInvariant) {
  SeededRng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_clip(rng, 3, 16, 12);
    const auto b = random_clip(rng, 3, 16, 12);
    const double got = psnr(a, b);
    EXPECT_NEAR(got, oracle::psnr(a.frames, b.frames), 1e-9);
    EXPECT_EQ(got, psnr(b, a));
  }
  // Any uniform +-d offset gives 20 log10(255 / d).
  for (int d = 1; d < 60; d += 7) {
    EXPECT_NEAR(psnr(constant_clip(2, 100), constant_clip(2, static_cast<std::uint8_t>(100 + d))),
                20 * std::log10(255.0 / d), 1e-9);
  }
}

TEST(Psnr, MonotoneInError) {
  SeededRng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_clip(rng, 2, 10, 10);
    auto b = a;
    for (auto& v : b.frames[0].data()) v = static_cast<std::uint8_t>(std::min(255, v + 3));
    auto c = b;
    // Push one more pixel further away from a.
    auto& px = c.frames[1](4, 4, 0);
    px = px < 128 ? 255 : 0;
    EXPECT_GE(psnr(a, b), psnr(a, c));
  }
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(constant_clip(2, 1), constant_clip(3, 1)), ShapeError);
  EXPECT_THROW(psnr(constant_clip(2, 1, 8, 8), constant_clip(2, 1, 9, 8)), ShapeError);
  EXPECT_THROW(psnr(gen::sequence({}), gen::sequence({})), EmptyInputError);
}

TEST(InMaskPsnr, FullMaskEqualsPsnr) {
  SeededRng rng(43);
  const auto a = random_clip(rng, 3, 12, 12);
  const auto b = random_clip(rng, 3, 12, 12);
  EXPECT_EQ(in_mask_psnr(a, b, std::vector<Mask>(3, Mask(12, 12, 1))), psnr(a, b));
}

TEST(InMaskPsnr, CheckerboardAndRandomMasksMatchOracle) {
  SeededRng rng(44);
  std::vector<Mask> checker(2, Mask(16, 16, 0));
  for (auto& m : checker) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) m(x, y) = (x + y) % 2;
    }
  }
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_clip(rng, 2, 16, 16);
    const auto b = random_clip(rng, 2, 16, 16);
    EXPECT_NEAR(in_mask_psnr(a, b, checker), oracle::in_mask_psnr(a.frames, b.frames, checker), 1e-9);
    std::vector<Mask> m{gen::random_mask(rng, 16, 16, 0.2), gen::random_mask(rng, 16, 16, 0.2)};
    m[0](0, 0) = 1;
    EXPECT_NEAR(in_mask_psnr(a, b, m), oracle::in_mask_psnr(a.frames, b.frames, m), 1e-9);
  }
}

TEST(InMaskPsnr, IgnoresPixelsOutsideMask) {
  SeededRng rng(45);
  const auto a = random_clip(rng, 2, 10, 10);
  auto b = a;
  const std::vector<Mask> m(2, gen::rect_mask(10, 10, 0, 0, 5, 10));
  for (int y = 0; y < 10; ++y) {
    for (int x = 5; x < 10; ++x) b.frames[1](x, y, 2) ^= 0xff;
  }
  EXPECT_TRUE(std::isinf(in_mask_psnr(a, b, m)));
  EXPECT_THROW(in_mask_psnr(a, b, std::vector<Mask>(2, Mask(10, 10, 0))), UndefinedMetricError);
  EXPECT_THROW(in_mask_psnr(a, b, std::vector<Mask>(1, Mask(10, 10, 1))), ShapeError);
}

TEST(ClipSsim, IdentityAndRange) {
  SeededRng rng(46);
  const auto a = random_clip(rng, 2, 16, 16);
  const auto b = random_clip(rng, 2, 16, 16);
  EXPECT_EQ(clip_ssim(a, a), 1.0);
  const double s = clip_ssim(a, b);
  EXPECT_LT(s, 1.0);
  EXPECT_GT(s, -1.0);
}

TEST(ParseScorerOutput, AcceptsWellFormedAndReportsMissing) {
  const auto req = requests({"a", "b", "c"});
  const auto r = parse_scorer_output("a\t0.25\nc\t1e-3\n\n", req);
  EXPECT_EQ(r.scores.at("a"), 0.25);
  EXPECT_EQ(r.scores.at("c"), 0.001);
  EXPECT_EQ(r.missing, std::vector<std::string>{"b"});
}

TEST(ParseScorerOutput, ProtocolViolations) {
  const auto req = requests({"a", "b"});
  EXPECT_THROW(parse_scorer_output("a 0.25\n", req), ProtocolError);
  EXPECT_THROW(parse_scorer_output("a\tnot-a-number\n", req), ProtocolError);
  EXPECT_THROW(parse_scorer_output("zz\t0.1\n", req), ProtocolError);
  EXPECT_THROW(parse_scorer_output("a\t0.1\na\t0.2\n", req), ProtocolError);
}

TEST(ExternalScorer, FixedValue) {
  const auto r = run_external_scorer(stub("--value 0.0"), requests({"x", "y"}));
  EXPECT_EQ(r.scores.size(), 2u);
  EXPECT_EQ(r.scores.at("x"), 0.0);
  EXPECT_TRUE(r.missing.empty());
}

TEST(ExternalScorer, DefaultScoresAreIdDerived) {
  const auto r = run_external_scorer(stub(), requests({"clip_a"}));
  EXPECT_NEAR(r.scores.at("clip_a"), static_cast<double>(fnv1a64("clip_a") % 1000) / 1000.0, 1e-6);
}

TEST(ExternalScorer, MissingAndFaults) {
  const auto r = run_external_scorer(stub("--omit y"), requests({"x", "y"}));
  EXPECT_EQ(r.missing, std::vector<std::string>{"y"});
  EXPECT_THROW(run_external_scorer(stub("--duplicate x"), requests({"x"})), ProtocolError);
  EXPECT_THROW(run_external_scorer(stub("--unknown q"), requests({"x"})), ProtocolError);
  EXPECT_THROW(run_external_scorer(stub("--garbage"), requests({"x"})), ProtocolError);
  try {
    run_external_scorer(stub("--exit 3"), requests({"x"}));
    FAIL() << "expected ScorerError";
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.exit_code(), 3);
    EXPECT_NE(e.diagnostics().find("failing on request"), std::string::npos);
  }
}

TEST(ExternalScorer, RejectsTabsInRequests) {
  std::vector<ScorerRequest> bad{{"a\tb", "/p", "/g"}};
  EXPECT_THROW(run_external_scorer(stub(), bad), ProtocolError);
}

TEST(Report, OneClipPerBin) {
  std::vector<ClipScore> s;
  const double v[] = {30, 29, 26, 22, 23};
  for (int b = 0; b < 5; ++b) s.push_back(score("c" + std::to_string(b), b, v[b]));
  const auto t = build_report(s);
  ASSERT_EQ(t.columns.size(), 6u);
  EXPECT_EQ(t.columns.back(), "Average");
  const MetricRow* row = t.find("pred", kMetricPsnr);
  ASSERT_NE(row, nullptr);
  for (int b = 0; b < 5; ++b) EXPECT_EQ(*row->bins[static_cast<std::size_t>(b)].mean, v[b]);
  EXPECT_NEAR(*row->average.mean, 26.0, 1e-12);
  EXPECT_EQ(t.find("pred", kMetricInMaskPsnr), nullptr);
  EXPECT_NE(t.find("pred", kMetricSsim), nullptr);
}

TEST(Report, EmptyBinsAreNotAvailable) {
  const auto t = build_report({score("a", 1, 20), score("b", 1, 22)});
  const MetricRow* row = t.find("pred", kMetricPsnr);
  EXPECT_FALSE(row->bins[0].mean.has_value());
  EXPECT_EQ(*row->bins[1].mean, 21.0);
  EXPECT_NE(t.render_text().find("n/a"), std::string::npos);
  EXPECT_TRUE(t.to_json().dump().find("null") != std::string::npos);
}

TEST(Report, InfiniteExcludedAndCounted) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto t = build_report({score("a", 0, 20), score("b", 0, inf), score("c", 2, inf)});
  const MetricRow* row = t.find("pred", kMetricPsnr);
  EXPECT_EQ(*row->bins[0].mean, 20.0);
  EXPECT_EQ(row->bins[0].count, 1);
  EXPECT_EQ(row->bins[0].infinite, 1);
  EXPECT_FALSE(row->bins[2].mean.has_value());
  EXPECT_EQ(row->bins[2].infinite, 1);
  EXPECT_EQ(row->average.infinite, 2);
  EXPECT_EQ(*row->average.mean, 20.0);
}

TEST(Report, ThirtyFiveClipsAcrossSevenScenes) {
  SeededRng rng(47);
  std::vector<ClipScore> s;
  for (int scene = 0; scene < 7; ++scene) {
    for (int b = 0; b < 5; ++b) {
      auto c = score("s" + std::to_string(scene) + "_b" + std::to_string(b), b, rng.uniform(15, 35),
                     "scene" + std::to_string(scene));
      c.in_mask_psnr_db = rng.uniform(10, 30);
      c.ssim = rng.uniform(0.5, 1);
      c.perceptual["lpips"] = rng.uniform(0, 0.5);
      s.push_back(c);
    }
  }
  const auto t = build_report(s);
  EXPECT_EQ(t.clip_count, 35);
  EXPECT_EQ(t.scenes.at("pred").size(), 7u);
  for (const char* metric : {kMetricPsnr, kMetricInMaskPsnr, kMetricSsim, "lpips"}) {
    const MetricRow* row = t.find("pred", metric);
    ASSERT_NE(row, nullptr) << metric;
    // Re-sum each bin and the overall mean from the raw scores.
    for (int b = 0; b < 5; ++b) {
      double sum = 0;
      int n = 0;
      for (const auto& c : s) {
        if (*c.crowd_bin != b) continue;
        const std::string m = metric;
        sum += m == kMetricPsnr ? c.psnr_db : m == kMetricInMaskPsnr ? *c.in_mask_psnr_db
                                          : m == kMetricSsim        ? c.ssim
                                                                    : c.perceptual.at("lpips");
        ++n;
      }
      EXPECT_EQ(row->bins[static_cast<std::size_t>(b)].count, 7);
      EXPECT_NEAR(*row->bins[static_cast<std::size_t>(b)].mean, sum / n, 1e-9);
    }
    double bins_total = 0;
    for (const auto& cell : row->bins) bins_total += *cell.mean * cell.count;
    EXPECT_NEAR(*row->average.mean, bins_total / 35.0, 1e-9);
  }
}

TEST(Report, MultipleMethodsAndErrors) {
  const auto t = build_report({{"ours", {score("a", 0, 25)}}, {"base", {score("a", 0, 21)}}});
  EXPECT_EQ(*t.find("ours", kMetricPsnr)->average.mean, 25.0);
  EXPECT_EQ(*t.find("base", kMetricPsnr)->average.mean, 21.0);
  EXPECT_THROW(build_report(std::vector<ClipScore>{}), EmptyInputError);
  ClipScore no_bin = score("x", 0, 1);
  no_bin.crowd_bin.reset();
  EXPECT_THROW(build_report({no_bin}), ValidationError);
}
