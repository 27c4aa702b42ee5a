#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crowdforge/pipeline.hpp"

namespace crowdforge {

// Small synthetic corpus in the pipeline's input layout: five 64x64
// backgrounds and five foregrounds, one foreground per Crowd% bin.
//   bg0..bg2  pass every background filter
//   bg3       too dark
//   bg4       hard cut at the middle frame and too many people
inline constexpr int kToySize = 64;

struct ToyCorpusOptions {
  int frames = 16;
  std::uint64_t seed = 7;
};

struct ToyCorpus {
  std::filesystem::path background_root;
  std::filesystem::path foreground_root;
  std::vector<std::string> backgrounds;
  std::vector<std::string> foregrounds;
  std::map<std::string, bool> background_passes;  // video -> expected verdict
  std::map<std::string, int> foreground_bin;      // video -> expected bin
};

ToyCorpus generate_toy_corpus(const std::filesystem::path& root, const ToyCorpusOptions& opts = {});

// Config matching the corpus: one clip per video, M scaled to 70% of the
// clip, one clip per bin.
PipelineConfig toy_config(const ToyCorpus& corpus, const std::filesystem::path& output_root, int frames = 16,
                          std::uint64_t master_seed = 2024);

}  // namespace crowdforge
