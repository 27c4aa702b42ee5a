#include "crowdforge/manifest.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdforge {

std::string to_string(ClipRole role) {
  switch (role) {
    case ClipRole::background: return "background";
    case ClipRole::foreground: return "foreground";
    case ClipRole::composite: return "composite";
  }
  return "?";
}

std::string to_string(ReviewStatus status) {
  switch (status) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::accepted: return "accepted";
    case ReviewStatus::rejected: return "rejected";
  }
  return "?";
}

ClipRole parse_role(const std::string& s) {
  if (s == "background") return ClipRole::background;
  if (s == "foreground") return ClipRole::foreground;
  if (s == "composite") return ClipRole::composite;
  throw ValidationError("unknown clip role '" + s + "'");
}

ReviewStatus parse_review_status(const std::string& s) {
  if (s == "pending") return ReviewStatus::pending;
  if (s == "accepted") return ReviewStatus::accepted;
  if (s == "rejected") return ReviewStatus::rejected;
  throw ValidationError("unknown review status '" + s + "'");
}

const std::vector<std::string>& review_reason_tags() {
  static const std::vector<std::string> tags{"floating_humans",      "disappearing_objects", "subtitles_or_overlays",
                                             "abrupt_camera_motion", "clip_overlap",         "other"};
  return tags;
}

bool is_review_reason(const std::string& tag) {
  const auto& tags = review_reason_tags();
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

ManifestEntry* DatasetManifest::find(const std::string& clip_id) {
  for (auto& e : entries) {
    if (e.clip_id == clip_id) return &e;
  }
  return nullptr;
}

const ManifestEntry* DatasetManifest::find(const std::string& clip_id) const {
  return const_cast<DatasetManifest*>(this)->find(clip_id);
}

bool DatasetManifest::stage_done(const std::string& stage) const {
  return std::find(stages_completed.begin(), stages_completed.end(), stage) != stages_completed.end();
}

void DatasetManifest::mark_stage(const std::string& stage) {
  if (!stage_done(stage)) stages_completed.push_back(stage);
}

void DatasetManifest::sort_entries() {
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.clip_id < b.clip_id; });
}

void validate_manifest(const DatasetManifest& m) {
  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : m.entries) {
    if (e.clip_id.empty()) throw ValidationError("manifest entry with empty clip_id");
    if (!by_id.emplace(e.clip_id, &e).second) {
      throw ValidationError("duplicate clip_id '" + e.clip_id + "' in manifest");
    }
  }
  for (const auto& e : m.entries) {
    if (e.review.status == ReviewStatus::rejected && e.review.reasons.empty()) {
      throw ValidationError("clip '" + e.clip_id + "' is rejected without a reason tag");
    }
    for (const auto& r : e.review.reasons) {
      if (!is_review_reason(r)) throw ValidationError("clip '" + e.clip_id + "' has unknown reason tag '" + r + "'");
    }
    if (e.crowd_bin && (*e.crowd_bin < 0 || *e.crowd_bin > 4)) {
      throw ValidationError("clip '" + e.clip_id + "' has crowd bin out of range");
    }
    if (e.role != ClipRole::composite) continue;
    auto check_ref = [&](const std::optional<std::string>& ref, ClipRole want, const char* what) {
      if (!ref) throw ValidationError("composite '" + e.clip_id + "' has no " + what + " reference");
      auto it = by_id.find(*ref);
      if (it == by_id.end()) {
        throw ValidationError("composite '" + e.clip_id + "' references missing " + what + " '" + *ref + "'");
      }
      if (it->second->role != want) {
        throw ValidationError("composite '" + e.clip_id + "': '" + *ref + "' is not a " + what + " clip");
      }
    };
    check_ref(e.background_id, ClipRole::background, "background");
    check_ref(e.foreground_id, ClipRole::foreground, "foreground");
  }
}

// --- JSON ------------------------------------------------------------------

json shadow_to_json(const ShadowParams& p) {
  return json{{"theta", p.theta}, {"shear_x", p.shear_x}, {"scale_y", p.scale_y}, {"alpha", p.alpha},
              {"sigma", p.sigma}};
}

namespace {

ShadowParams shadow_from_json(const json& j) {
  ShadowParams p;
  p.theta = j.at("theta").get<double>();
  p.shear_x = j.at("shear_x").get<double>();
  p.scale_y = j.at("scale_y").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.sigma = j.at("sigma").get<double>();
  return p;
}

json verdict_to_json(const FilterVerdict& v) {
  return json{{"mean_luminance", v.mean_luminance},
              {"luminance_passed", v.luminance_passed},
              {"transition_indices", v.transition_indices},
              {"transitions_passed", v.transitions_passed},
              {"person_violation_fraction", v.person_violation_fraction},
              {"person_passed", v.person_passed},
              {"passed", v.passed}};
}

FilterVerdict verdict_from_json(const json& j) {
  FilterVerdict v;
  v.mean_luminance = j.at("mean_luminance").get<double>();
  v.luminance_passed = j.at("luminance_passed").get<bool>();
  v.transition_indices = j.at("transition_indices").get<std::vector<int>>();
  v.transitions_passed = j.at("transitions_passed").get<bool>();
  v.person_violation_fraction = j.at("person_violation_fraction").get<double>();
  v.person_passed = j.at("person_passed").get<bool>();
  v.passed = j.at("passed").get<bool>();
  return v;
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.clip_id = j.at("clip_id").get<std::string>();
  e.role = parse_role(j.at("role").get<std::string>());
  e.split = j.value("split", std::string("train"));
  if (auto it = j.find("source"); it != j.end()) {
    e.source.source_video_id = it->at("video_id").get<std::string>();
    e.source.start_frame = it->at("start_frame").get<int>();
    e.source.end_frame = it->at("end_frame").get<int>();
  }
  e.width = j.value("width", 0);
  e.height = j.value("height", 0);
  if (auto it = j.find("filter"); it != j.end() && !it->is_null()) e.filter = verdict_from_json(*it);
  e.masked_frame_count = get_optional<int>(j, "masked_frame_count");
  e.crowd_percent = get_optional<double>(j, "crowd_percent");
  e.crowd_bin = get_optional<int>(j, "crowd_bin");
  e.selected = j.value("selected", false);
  e.background_id = get_optional<std::string>(j, "background_id");
  e.foreground_id = get_optional<std::string>(j, "foreground_id");
  if (auto it = j.find("shadow_params"); it != j.end() && !it->is_null()) e.shadow = shadow_from_json(*it);
  e.seed = get_optional<std::uint64_t>(j, "seed");
  if (auto it = j.find("review"); it != j.end()) {
    e.review.status = parse_review_status(it->at("status").get<std::string>());
    e.review.reasons = it->value("reasons", std::vector<std::string>{});
    e.review.note = it->value("note", std::string{});
    e.review.decided_at = it->value("decided_at", std::string{});
  }
  e.paths = j.value("paths", std::map<std::string, std::string>{});
  return e;
}

}  // namespace

json entry_to_json(const ManifestEntry& e) {
  json j;
  j["clip_id"] = e.clip_id;
  j["role"] = to_string(e.role);
  j["split"] = e.split;
  j["source"] = {{"video_id", e.source.source_video_id},
                 {"start_frame", e.source.start_frame},
                 {"end_frame", e.source.end_frame}};
  j["width"] = e.width;
  j["height"] = e.height;
  if (e.filter) j["filter"] = verdict_to_json(*e.filter);
  put_optional(j, "masked_frame_count", e.masked_frame_count);
  put_optional(j, "crowd_percent", e.crowd_percent);
  put_optional(j, "crowd_bin", e.crowd_bin);
  j["selected"] = e.selected;
  put_optional(j, "background_id", e.background_id);
  put_optional(j, "foreground_id", e.foreground_id);
  if (e.shadow) j["shadow_params"] = shadow_to_json(*e.shadow);
  put_optional(j, "seed", e.seed);
  j["review"] = {{"status", to_string(e.review.status)},
                 {"reasons", e.review.reasons},
                 {"note", e.review.note},
                 {"decided_at", e.review.decided_at}};
  j["paths"] = e.paths;
  return j;
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "crowdforge-manifest/1";
  j["master_seed"] = m.master_seed;
  j["roots"] = m.roots;
  j["stages_completed"] = m.stages_completed;
  j["entries"] = json::array();
  for (const auto& e : m.entries) j["entries"].push_back(entry_to_json(e));
  return j;
}

DatasetManifest manifest_from_json(const json& doc) {
  try {
    DatasetManifest m;
    m.master_seed = doc.value("master_seed", std::uint64_t{0});
    m.roots = doc.value("roots", std::map<std::string, std::string>{});
    m.stages_completed = doc.value("stages_completed", std::vector<std::string>{});
    for (const auto& e : doc.at("entries")) m.entries.push_back(entry_from_json(e));
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  DatasetManifest m = manifest_from_json(doc);
  validate_manifest(m);
  return m;
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot write " + tmp.string());
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0 &&
                    ::fsync(::fileno(f)) == 0;
    std::fclose(f);
    if (!ok) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  validate_manifest(manifest);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, manifest_to_json(manifest).dump(2) + "\n");
}

}  // namespace crowdforge
