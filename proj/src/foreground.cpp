#include "crowdforge/foreground.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "crowdforge/seeding.hpp"

namespace crowdforge {
namespace {

double percent_from_counts(std::uint64_t covered, long long frame_area, std::size_t frames) {
  if (frame_area <= 0) throw ValidationError("crowd_percent: frame area must be positive");
  if (frames == 0) return 0.0;
  return 100.0 * static_cast<double>(covered) / (static_cast<double>(frame_area) * static_cast<double>(frames));
}

template <typename Raster>
std::uint64_t nonzero(const Raster& r) {
  std::uint64_t n = 0;
  for (auto v : r.data()) n += v != 0;
  return n;
}

}  // namespace

void SelectionConfig::validate(int clip_len) const {
  if (min_masked_frames < 1 || min_masked_frames > clip_len) {
    throw ConfigError("min masked frames must lie in [1, " + std::to_string(clip_len) + "]");
  }
  if (per_bin < 1) throw ConfigError("per-bin count must be at least 1");
}

int masked_frame_count(const InstanceMaskSequence& masks) {
  int n = 0;
  for (const LabelFrame& f : masks.frames()) {
    const auto d = f.data();
    n += std::any_of(d.begin(), d.end(), [](std::uint16_t v) { return v != 0; }) ? 1 : 0;
  }
  return n;
}

int masked_frame_count(const std::vector<Mask>& masks) {
  int n = 0;
  for (const Mask& m : masks) {
    const auto d = m.data();
    n += std::any_of(d.begin(), d.end(), [](std::uint8_t v) { return v != 0; }) ? 1 : 0;
  }
  return n;
}

double crowd_percent(const InstanceMaskSequence& masks, long long frame_area) {
  std::uint64_t covered = 0;
  for (const LabelFrame& f : masks.frames()) covered += nonzero(f);
  return percent_from_counts(covered, frame_area, masks.frame_count());
}

double crowd_percent(const std::vector<Mask>& masks, long long frame_area) {
  std::uint64_t covered = 0;
  for (const Mask& m : masks) covered += nonzero(m);
  return percent_from_counts(covered, frame_area, masks.size());
}

CrowdStats crowd_stats(const InstanceMaskSequence& masks) {
  CrowdStats s;
  s.masked_frame_count = masked_frame_count(masks);
  if (masks.frame_count() > 0) {
    s.crowd_percent = crowd_percent(masks, static_cast<long long>(masks.width()) * masks.height());
  }
  s.crowd_bin = assign_bin(s.crowd_percent);
  return s;
}

std::optional<int> assign_bin(double p) {
  if (!(p >= 0.0 && p <= 100.0)) {
    throw ValidationError("crowd percent must lie in [0, 100]");
  }
  if (p < 10.0) return 0;
  if (p < 20.0) return 1;
  if (p < 30.0) return 2;
  if (p < 40.0) return 3;
  if (p <= 50.0) return 4;
  return std::nullopt;
}

std::string bin_label(int bin) {
  if (bin < 0 || bin >= kCrowdBinCount) throw ValidationError("crowd bin out of range");
  return std::to_string(10 * bin) + "-" + std::to_string(10 * (bin + 1)) + "%";
}

SelectionResult stratified_sample(const std::vector<std::pair<std::string, int>>& candidates,
                                  const SelectionConfig& cfg) {
  if (cfg.per_bin < 1) throw ConfigError("per-bin count must be at least 1");
  // (key, id) per bin; the key is a pure function of (seed, id).
  std::array<std::vector<std::pair<std::uint64_t, std::string>>, kCrowdBinCount> pools;
  std::set<std::string> seen;
  for (const auto& [id, bin] : candidates) {
    if (bin < 0 || bin >= kCrowdBinCount) {
      throw ValidationError("candidate '" + id + "' has invalid crowd bin " + std::to_string(bin));
    }
    if (!seen.insert(id).second) throw ValidationError("duplicate candidate '" + id + "'");
    pools[static_cast<std::size_t>(bin)].emplace_back(splitmix64(derive_clip_seed(cfg.seed, id)), id);
  }

  SelectionResult result;
  for (int b = 0; b < kCrowdBinCount; ++b) {
    auto& pool = pools[static_cast<std::size_t>(b)];
    std::sort(pool.begin(), pool.end());
    auto& report = result.bins[static_cast<std::size_t>(b)];
    report.available = static_cast<int>(pool.size());
    report.selected = std::min(report.available, cfg.per_bin);
    report.shortfall = cfg.per_bin - report.selected;
    std::vector<std::string> chosen;
    for (int i = 0; i < report.selected; ++i) chosen.push_back(pool[static_cast<std::size_t>(i)].second);
    std::sort(chosen.begin(), chosen.end());
    result.selected.insert(result.selected.end(), chosen.begin(), chosen.end());
    if (report.shortfall > 0) {
      result.warnings.push_back("bin " + bin_label(b) + ": " + std::to_string(report.available) +
                                " candidates, " + std::to_string(report.shortfall) + " short of " +
                                std::to_string(cfg.per_bin));
    }
  }
  return result;
}

}  // namespace crowdforge
