#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crowdforge/filters.hpp"
#include "crowdforge/foreground.hpp"
#include "crowdforge/manifest.hpp"
#include "crowdforge/metrics.hpp"
#include "crowdforge/shadow.hpp"

namespace crowdforge {

// Corpus layout:
//   <background_root>/<video>/frames/frame_%05d.png
//   <background_root>/<video>/counts.json        per-frame person counts
//   <foreground_root>/<video>/frames/frame_%05d.png
//   <foreground_root>/<video>/masks/frame_%05d.png + masks/labels.json
// Video names must be unique across both roots.
struct PipelinePaths {
  std::filesystem::path background_root;
  std::filesystem::path foreground_root;
  std::filesystem::path output_root;
  std::filesystem::path manifest;  // empty: <output_root>/manifest.json

  std::filesystem::path manifest_path() const;
};

struct PipelineConfig {
  PipelinePaths paths;
  FilterConfig filter;
  SelectionConfig selection;
  ShadowSamplerConfig shadow;
  std::uint64_t master_seed = 0;
  int workers = 0;  // 0: OpenMP default
  int clip_len = kCanonicalClipLength;
  int stride = kCanonicalClipLength;
  // Source videos whose clips form the test split.
  std::vector<std::string> test_video_ids;

  // Nested configs, clip geometry, and existence of the input roots.
  void validate() const;
};

// Unknown keys are a ConfigError so typos do not silently fall back to
// defaults. Relative paths resolve against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

inline constexpr const char* kStageIngest = "ingest";
inline constexpr const char* kStageFilterBg = "filter-bg";
inline constexpr const char* kStageSelectFg = "select-fg";
inline constexpr const char* kStageCompose = "compose";
inline constexpr const char* kStageEvaluate = "evaluate";
inline constexpr const char* kStageReview = "review";

// Manifest stages a stage requires.
const std::vector<std::string>& stage_dependencies(const std::string& stage);
bool is_known_stage(const std::string& stage);

struct StageOptions {
  bool force = false;  // allow overwriting composite directories
};

struct StageReport {
  std::string stage;
  bool changed = false;  // manifest content differs from before the run
  int processed = 0;
  int accepted = 0;
  int rejected = 0;
  std::map<std::string, int> reasons;  // rejection reason -> count
  std::vector<std::string> warnings;
  nlohmann::json details = nlohmann::json::object();

  nlohmann::json to_json() const;
  std::string render_text() const;
};

// Throws DependencyError naming the first missing prerequisite stage.
void check_dependencies(const DatasetManifest& manifest, const std::string& stage);

// Runs one manifest-producing stage (ingest, filter-bg, select-fg, compose)
// and rewrites the manifest. Pending review decisions from the decision log
// are folded in first. A stage whose output changed invalidates the stages
// downstream of it.
StageReport run_stage(const std::string& stage, const PipelineConfig& cfg, const StageOptions& opts = {});

// In-memory stage bodies (exposed for tests).
StageReport stage_ingest(DatasetManifest& manifest, const PipelineConfig& cfg);
StageReport stage_filter_bg(DatasetManifest& manifest, const PipelineConfig& cfg);
StageReport stage_select_fg(DatasetManifest& manifest, const PipelineConfig& cfg);
StageReport stage_compose(DatasetManifest& manifest, const PipelineConfig& cfg, const StageOptions& opts);

// Background chosen for a foreground clip, or nullopt when none qualifies.
std::optional<std::string> choose_background(const DatasetManifest& manifest, const ManifestEntry& fg,
                                             std::uint64_t master_seed);
std::string composite_id(const std::string& foreground_id);

struct EvaluateOptions {
  // method name -> root holding <clip_id>/frame_%05d.png predictions
  std::vector<std::pair<std::string, std::filesystem::path>> predictions;
  // Root holding <clip_id>/{gt,mask}; empty: the manifest's directory.
  std::filesystem::path gt_root;
  // metric name -> shell command (see run_external_scorer)
  std::vector<std::pair<std::string, std::string>> scorers;
  std::optional<std::string> split;  // restrict to one split
};

struct EvaluateResult {
  ReportTable table;
  std::map<std::string, std::vector<ClipScore>> scores;  // per method
  std::vector<std::string> warnings;
};

// Scores every composite clip of the manifest (after the compose stage).
EvaluateResult run_evaluate(const DatasetManifest& manifest, const std::filesystem::path& manifest_path,
                            const EvaluateOptions& opts, int workers = 0);

}  // namespace crowdforge
