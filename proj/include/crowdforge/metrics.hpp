#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdforge/clip_model.hpp"
#include "crowdforge/foreground.hpp"

namespace crowdforge {

inline constexpr double kPsnrPeak = 255.0;

// Pooled-MSE PSNR over all pixels, channels and frames. Identical inputs
// give +infinity; callers test std::isinf rather than comparing numbers.
double psnr(const FrameSequence& a, const FrameSequence& b);
// PSNR restricted to masked pixels. Throws UndefinedMetricError when the
// mask clip has no set pixel.
double in_mask_psnr(const FrameSequence& a, const FrameSequence& b, const std::vector<Mask>& mask);
// 10 log10(peak^2 / (sum / count)); +infinity when sum == 0.
double psnr_from_sse(std::uint64_t sum, std::uint64_t count);
// Mean per-frame SSIM of the grayscale frames.
double clip_ssim(const FrameSequence& a, const FrameSequence& b);

struct ClipScore {
  std::string clip_id;
  std::string scene;  // source video / city, optional
  double psnr_db = 0.0;
  std::optional<double> in_mask_psnr_db;
  double ssim = 0.0;
  std::map<std::string, double> perceptual;
  std::optional<int> crowd_bin;

  bool psnr_infinite() const noexcept;
};

// --- external perceptual scorer ------------------------------------------
// Request line:  clip_id \t pred_dir \t gt_dir
// Response line: clip_id \t score
struct ScorerRequest {
  std::string clip_id;
  std::filesystem::path pred_dir;
  std::filesystem::path gt_dir;
};

struct ScorerResult {
  std::map<std::string, double> scores;
  std::vector<std::string> missing;
};

// Runs `command` once through the shell, feeding every request on stdin.
ScorerResult run_external_scorer(const std::string& command, const std::vector<ScorerRequest>& requests);
// Parses a scorer's stdout against the issued requests (exposed for tests).
ScorerResult parse_scorer_output(const std::string& output, const std::vector<ScorerRequest>& requests);

// --- reporting -----------------------------------------------------------

struct MetricCell {
  std::optional<double> mean;  // empty when no finite values
  int count = 0;               // values included in the mean
  int infinite = 0;            // excluded +inf values (PSNR only)
};

struct MetricRow {
  std::string method;
  std::string metric;
  std::array<MetricCell, kCrowdBinCount> bins{};
  MetricCell average;
};

struct ReportTable {
  std::vector<std::string> columns;  // five Crowd% labels + "Average"
  std::vector<MetricRow> rows;
  // scene -> metric -> cell, per method
  std::map<std::string, std::map<std::string, std::map<std::string, MetricCell>>> scenes;
  int clip_count = 0;

  const MetricRow* find(const std::string& method, const std::string& metric) const;
  std::string render_text() const;
  nlohmann::json to_json() const;
};

// Metric names used in rows.
inline constexpr const char* kMetricPsnr = "PSNR";
inline constexpr const char* kMetricInMaskPsnr = "InMaskPSNR";
inline constexpr const char* kMetricSsim = "SSIM";

ReportTable build_report(const std::vector<ClipScore>& scores, const std::string& method = "pred");
ReportTable build_report(const std::vector<std::pair<std::string, std::vector<ClipScore>>>& methods);

}  // namespace crowdforge
