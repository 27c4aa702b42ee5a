#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdforge/manifest.hpp"

namespace crowdforge {

struct ReviewDecision {
  std::string clip_id;
  ReviewStatus verdict = ReviewStatus::accepted;  // accepted or rejected
  std::vector<std::string> reasons;
  std::string note;
  std::string timestamp;

  // Throws ValidationError: pending verdict, rejected without reasons,
  // unknown reason tags.
  void validate() const;
  bool operator==(const ReviewDecision&) const = default;
};

nlohmann::json decision_to_json(const ReviewDecision& d);
// Throws ValidationError on missing or mistyped fields.
ReviewDecision decision_from_json(const nlohmann::json& j);

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

// Append-only JSON-lines log. Every append is flushed and synced before it
// returns; a torn trailing line from a crash is ignored on replay.
class DecisionLog {
 public:
  explicit DecisionLog(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  void append(const ReviewDecision& decision);
  std::vector<ReviewDecision> replay() const;

 private:
  std::filesystem::path path_;
};

// <manifest>.decisions.jsonl
std::filesystem::path decision_log_path(const std::filesystem::path& manifest_path);

// Latest decision per clip, in log order.
std::map<std::string, ReviewDecision> fold_decisions(const std::vector<ReviewDecision>& log);

// Writes folded verdicts into the manifest. Decisions for clips that are not
// in the manifest are returned, not applied.
std::vector<std::string> apply_decisions(DatasetManifest& manifest,
                                         const std::map<std::string, ReviewDecision>& folded);

struct CuratedExport {
  // split -> bin label -> accepted composite ids (sorted)
  std::map<std::string, std::map<std::string, std::vector<std::string>>> groups;
  int accepted = 0;
  int pending = 0;
  int rejected = 0;

  nlohmann::json to_json() const;
};

CuratedExport export_curated(const DatasetManifest& manifest);

}  // namespace crowdforge
