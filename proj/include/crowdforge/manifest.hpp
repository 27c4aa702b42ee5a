#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdforge/clip_model.hpp"
#include "crowdforge/filters.hpp"
#include "crowdforge/shadow.hpp"

namespace crowdforge {

enum class ClipRole { background, foreground, composite };
enum class ReviewStatus { pending, accepted, rejected };

std::string to_string(ClipRole role);
std::string to_string(ReviewStatus status);
ClipRole parse_role(const std::string& s);
ReviewStatus parse_review_status(const std::string& s);

// Reason tags a reviewer may attach to a rejection.
const std::vector<std::string>& review_reason_tags();
bool is_review_reason(const std::string& tag);

struct ReviewState {
  ReviewStatus status = ReviewStatus::pending;
  std::vector<std::string> reasons;
  std::string note;
  std::string decided_at;  // ISO-8601 UTC, empty while pending

  bool operator==(const ReviewState&) const = default;
};

struct ManifestEntry {
  std::string clip_id;
  ClipRole role = ClipRole::background;
  std::string split = "train";
  ClipSpan source;
  int width = 0;
  int height = 0;

  // background
  std::optional<FilterVerdict> filter;

  // foreground / composite
  std::optional<int> masked_frame_count;
  std::optional<double> crowd_percent;
  std::optional<int> crowd_bin;
  bool selected = false;

  // composite
  std::optional<std::string> background_id;
  std::optional<std::string> foreground_id;
  std::optional<ShadowParams> shadow;
  std::optional<std::uint64_t> seed;

  ReviewState review;
  // Layer name -> path relative to the dataset root (frames, masks, counts,
  // input, mask, gt).
  std::map<std::string, std::string> paths;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::uint64_t master_seed = 0;
  // "background" / "foreground" -> source corpus root. Entry paths of those
  // roles are relative to it; composite paths are relative to the dataset root.
  std::map<std::string, std::string> roots;
  std::vector<std::string> stages_completed;
  std::vector<ManifestEntry> entries;

  ManifestEntry* find(const std::string& clip_id);
  const ManifestEntry* find(const std::string& clip_id) const;
  bool stage_done(const std::string& stage) const;
  void mark_stage(const std::string& stage);
  // Entries sorted by clip id (the canonical on-disk order).
  void sort_entries();

  bool operator==(const DatasetManifest&) const = default;
};

// Throws ValidationError: duplicate ids, dangling or mistyped composite
// references, rejected decisions without a reason tag.
void validate_manifest(const DatasetManifest& manifest);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& doc);
nlohmann::json entry_to_json(const ManifestEntry& entry);
nlohmann::json shadow_to_json(const ShadowParams& p);

DatasetManifest read_manifest(const std::filesystem::path& path);
// Validates, then writes to a temporary sibling and renames over `path`.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Writes `text` to path atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace crowdforge
