#include "crowdforge/toy_corpus.hpp"

#include <algorithm>
#include <cmath>

#include "crowdforge/png_io.hpp"
#include "crowdforge/seeding.hpp"

namespace fs = std::filesystem;

namespace crowdforge {

namespace {

std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Deterministic noise in [-amp, amp] keyed by position and salt.
double noise(std::uint64_t seed, int x, int y, int t, double amp) {
  const std::uint64_t key = seed ^ (static_cast<std::uint64_t>(x) << 40) ^ (static_cast<std::uint64_t>(y) << 20) ^
                            static_cast<std::uint64_t>(t + 1);
  const double u = static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * amp;
}

double texture(std::uint64_t seed, int x, int y, double phase) {
  return 50.0 * std::sin(0.3 * x + phase) * std::cos(0.25 * y + 0.5 * phase) + noise(seed, x, y, -1, 8.0);
}

Frame background_frame(std::uint64_t seed, int t, double mean, double phase, bool inverted) {
  Frame f(kToySize, kToySize);
  for (int y = 0; y < kToySize; ++y) {
    for (int x = 0; x < kToySize; ++x) {
      double v = texture(seed, x, y, phase);
      if (inverted) v = -v;
      v = mean + v + noise(seed, x, y, t, 3.0);
      f(x, y, 0) = clamp8(v + 10.0);
      f(x, y, 1) = clamp8(v);
      f(x, y, 2) = clamp8(v - 10.0);
    }
  }
  return f;
}

struct ToyPerson {
  int x0;
  int height;
};

}  // namespace

ToyCorpus generate_toy_corpus(const fs::path& root, const ToyCorpusOptions& opts) {
  if (opts.frames < 2) throw ConfigError("toy corpus needs at least two frames");
  ToyCorpus corpus;
  corpus.background_root = root / "backgrounds";
  corpus.foreground_root = root / "foregrounds";

  for (int b = 0; b < 5; ++b) {
    const std::string video = "bg" + std::to_string(b);
    const fs::path dir = corpus.background_root / video;
    const std::uint64_t seed = derive_clip_seed(opts.seed, video);
    const double mean = b == 3 ? 25.0 : 100.0 + 10.0 * b;
    std::vector<int> counts(static_cast<std::size_t>(opts.frames), b % 3);
    if (b == 4) std::fill(counts.begin(), counts.begin() + std::max(2, opts.frames / 4), 6);
    fs::create_directories(dir / "frames");
    for (int t = 0; t < opts.frames; ++t) {
      const bool inverted = b == 4 && t >= opts.frames / 2;
      png::write_rgb(background_frame(seed, t, mean, 0.7 * b, inverted), dir / "frames" / frame_file_name(t));
    }
    save_person_counts(counts, dir / "counts.json");
    corpus.backgrounds.push_back(video);
    corpus.background_passes[video] = b < 3;
  }

  // Person k of foreground b: a 10-pixel-wide column whose height puts the
  // clip near the middle of bin b (5, 15, 25, 35, 45 %).
  constexpr int kHeights[5] = {20, 31, 34, 36, 37};
  constexpr int kPersonWidth = 10;
  constexpr int kFeet = kToySize - 6;
  for (int b = 0; b < 5; ++b) {
    const std::string video = "fg" + std::to_string(b);
    const fs::path dir = corpus.foreground_root / video;
    const std::uint64_t seed = derive_clip_seed(opts.seed, video);
    std::vector<ToyPerson> people;
    for (int k = 0; k <= b; ++k) people.push_back({2 + 12 * k, kHeights[b]});

    std::vector<LabelFrame> labels;
    fs::create_directories(dir / "frames");
    for (int t = 0; t < opts.frames; ++t) {
      Frame f(kToySize, kToySize);
      LabelFrame l(kToySize, kToySize, 0);
      for (int y = 0; y < kToySize; ++y) {
        for (int x = 0; x < kToySize; ++x) {
          const double v = 120.0 + texture(seed, x, y, 1.3) + noise(seed, x, y, t, 3.0);
          f(x, y, 0) = clamp8(v - 20.0);
          f(x, y, 1) = clamp8(v + 15.0);
          f(x, y, 2) = clamp8(v - 5.0);
        }
      }
      const int shift = (t / 4) % 2;
      for (std::size_t k = 0; k < people.size(); ++k) {
        const auto id = static_cast<std::uint16_t>(k + 1);
        const int x0 = people[k].x0 + shift;
        for (int y = kFeet - people[k].height; y < kFeet; ++y) {
          for (int x = x0; x < x0 + kPersonWidth; ++x) {
            l(x, y) = id;
            const double shade = 40.0 + 30.0 * static_cast<double>(k) + noise(seed, x, y, t, 6.0);
            f(x, y, 0) = clamp8(200.0 - shade);
            f(x, y, 1) = clamp8(90.0 + 0.5 * shade);
            f(x, y, 2) = clamp8(60.0 + shade);
          }
        }
      }
      png::write_rgb(f, dir / "frames" / frame_file_name(t));
      labels.push_back(std::move(l));
    }
    std::map<std::uint16_t, std::string> names;
    for (std::size_t k = 0; k < people.size(); ++k) names[static_cast<std::uint16_t>(k + 1)] = "person";
    save_instance_masks(InstanceMaskSequence(std::move(labels), std::move(names)), dir / "masks");
    corpus.foregrounds.push_back(video);
    corpus.foreground_bin[video] = b;
  }
  return corpus;
}

PipelineConfig toy_config(const ToyCorpus& corpus, const fs::path& output_root, int frames,
                          std::uint64_t master_seed) {
  PipelineConfig cfg;
  cfg.paths.background_root = corpus.background_root;
  cfg.paths.foreground_root = corpus.foreground_root;
  cfg.paths.output_root = output_root;
  cfg.clip_len = frames;
  cfg.stride = frames;
  cfg.selection.min_masked_frames = static_cast<int>(std::ceil(0.7 * frames));
  cfg.selection.per_bin = 1;
  cfg.master_seed = master_seed;
  cfg.selection.seed = master_seed;
  return cfg;
}

}  // namespace crowdforge
