#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowdforge/clip_model.hpp"

namespace crowdforge {

inline constexpr int kCrowdBinCount = 5;

struct SelectionConfig {
  int min_masked_frames = 138;  // M, 70% of a canonical clip
  int per_bin = 200;
  std::uint64_t seed = 0;

  // clip_len bounds M from above.
  void validate(int clip_len = kCanonicalClipLength) const;
  bool operator==(const SelectionConfig&) const = default;
};

struct CrowdStats {
  int masked_frame_count = 0;
  double crowd_percent = 0.0;
  std::optional<int> crowd_bin;
  bool operator==(const CrowdStats&) const = default;
};

// Frames whose union mask has at least one set pixel.
int masked_frame_count(const InstanceMaskSequence& masks);
int masked_frame_count(const std::vector<Mask>& masks);

// 100 * mean over frames of |union mask| / frame_area.
double crowd_percent(const InstanceMaskSequence& masks, long long frame_area);
double crowd_percent(const std::vector<Mask>& masks, long long frame_area);

CrowdStats crowd_stats(const InstanceMaskSequence& masks);

// [10k, 10(k+1)) for k = 0..3, [40, 50] for k = 4, none above 50.
std::optional<int> assign_bin(double crowd_percent);
std::string bin_label(int bin);

struct BinReport {
  int available = 0;
  int selected = 0;
  int shortfall = 0;
};

struct SelectionResult {
  std::vector<std::string> selected;  // sorted by (bin, clip_id)
  std::array<BinReport, kCrowdBinCount> bins{};
  std::vector<std::string> warnings;
};

// Uniform sampling without replacement of up to per_bin ids per bin. Each
// candidate gets a key derived from (seed, clip_id); the smallest keys win,
// so the result does not depend on candidate order.
SelectionResult stratified_sample(const std::vector<std::pair<std::string, int>>& candidates,
                                  const SelectionConfig& cfg);

}  // namespace crowdforge
