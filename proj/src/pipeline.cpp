#include "crowdforge/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include "crowdforge/compositor.hpp"
#include "crowdforge/decisions.hpp"
#include "crowdforge/errors.hpp"
#include "crowdforge/png_io.hpp"
#include "crowdforge/seeding.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdforge {

fs::path PipelinePaths::manifest_path() const {
  return manifest.empty() ? output_root / "manifest.json" : manifest;
}

void PipelineConfig::validate() const {
  filter.validate();
  if (clip_len < 1) throw ConfigError("clip_len must be at least 1");
  if (stride < clip_len) throw ConfigError("stride must be >= clip_len so clips do not overlap");
  selection.validate(clip_len);
  shadow.validate();
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (paths.output_root.empty()) throw ConfigError("paths.output_root is required");
  for (const auto& [name, p] : {std::pair{"background_root", paths.background_root},
                                std::pair{"foreground_root", paths.foreground_root}}) {
    if (p.empty()) throw ConfigError(std::string("paths.") + name + " is required");
    if (!fs::is_directory(p)) throw ConfigError(std::string("paths.") + name + " does not exist: " + p.string());
  }
}

// --- config file -----------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
      throw ConfigError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key)) return {};
  fs::path p = j.at(key).get<std::string>();
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig cfg;
  try {
    check_keys(j, {"paths", "filter", "selection", "shadow", "master_seed", "workers", "clip_len", "stride",
                   "test_video_ids"},
               "");
    if (auto it = j.find("paths"); it != j.end()) {
      check_keys(*it, {"background_root", "foreground_root", "output_root", "manifest"}, "paths");
      cfg.paths.background_root = resolve(*it, "background_root", base_dir);
      cfg.paths.foreground_root = resolve(*it, "foreground_root", base_dir);
      cfg.paths.output_root = resolve(*it, "output_root", base_dir);
      cfg.paths.manifest = resolve(*it, "manifest", base_dir);
    }
    if (auto it = j.find("filter"); it != j.end()) {
      check_keys(*it, {"y_min", "y_max", "ssim_cut", "hist_corr_cut", "max_people", "tolerance"}, "filter");
      read_key(*it, "y_min", cfg.filter.y_min);
      read_key(*it, "y_max", cfg.filter.y_max);
      read_key(*it, "ssim_cut", cfg.filter.ssim_cut);
      read_key(*it, "hist_corr_cut", cfg.filter.hist_corr_cut);
      read_key(*it, "max_people", cfg.filter.max_people);
      read_key(*it, "tolerance", cfg.filter.tolerance);
    }
    if (auto it = j.find("selection"); it != j.end()) {
      check_keys(*it, {"min_masked_frames", "per_bin"}, "selection");
      read_key(*it, "min_masked_frames", cfg.selection.min_masked_frames);
      read_key(*it, "per_bin", cfg.selection.per_bin);
    }
    if (auto it = j.find("shadow"); it != j.end()) {
      check_keys(*it, {"theta_min", "theta_max", "shear_min", "shear_max", "scale_min", "scale_max", "alpha_min",
                       "alpha_max", "sigma_fraction", "sigma_min"},
                 "shadow");
      read_key(*it, "theta_min", cfg.shadow.theta_min);
      read_key(*it, "theta_max", cfg.shadow.theta_max);
      read_key(*it, "shear_min", cfg.shadow.shear_min);
      read_key(*it, "shear_max", cfg.shadow.shear_max);
      read_key(*it, "scale_min", cfg.shadow.scale_min);
      read_key(*it, "scale_max", cfg.shadow.scale_max);
      read_key(*it, "alpha_min", cfg.shadow.alpha_min);
      read_key(*it, "alpha_max", cfg.shadow.alpha_max);
      read_key(*it, "sigma_fraction", cfg.shadow.sigma_fraction);
      read_key(*it, "sigma_min", cfg.shadow.sigma_min);
    }
    read_key(j, "master_seed", cfg.master_seed);
    read_key(j, "workers", cfg.workers);
    read_key(j, "clip_len", cfg.clip_len);
    read_key(j, "stride", cfg.stride);
    read_key(j, "test_video_ids", cfg.test_video_ids);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.selection.seed = cfg.master_seed;
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  json paths{{"background_root", cfg.paths.background_root.string()},
             {"foreground_root", cfg.paths.foreground_root.string()},
             {"output_root", cfg.paths.output_root.string()}};
  if (!cfg.paths.manifest.empty()) paths["manifest"] = cfg.paths.manifest.string();
  const auto& f = cfg.filter;
  const auto& s = cfg.shadow;
  return json{{"paths", paths},
              {"filter",
               {{"y_min", f.y_min},
                {"y_max", f.y_max},
                {"ssim_cut", f.ssim_cut},
                {"hist_corr_cut", f.hist_corr_cut},
                {"max_people", f.max_people},
                {"tolerance", f.tolerance}}},
              {"selection",
               {{"min_masked_frames", cfg.selection.min_masked_frames}, {"per_bin", cfg.selection.per_bin}}},
              {"shadow",
               {{"theta_min", s.theta_min},
                {"theta_max", s.theta_max},
                {"shear_min", s.shear_min},
                {"shear_max", s.shear_max},
                {"scale_min", s.scale_min},
                {"scale_max", s.scale_max},
                {"alpha_min", s.alpha_min},
                {"alpha_max", s.alpha_max},
                {"sigma_fraction", s.sigma_fraction},
                {"sigma_min", s.sigma_min}}},
              {"master_seed", cfg.master_seed},
              {"workers", cfg.workers},
              {"clip_len", cfg.clip_len},
              {"stride", cfg.stride},
              {"test_video_ids", cfg.test_video_ids}};
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

// --- stages ----------------------------------------------------------------

const std::vector<std::string>& stage_dependencies(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps{
      {kStageIngest, {}},
      {kStageFilterBg, {kStageIngest}},
      {kStageSelectFg, {kStageIngest}},
      {kStageCompose, {kStageFilterBg, kStageSelectFg}},
      {kStageEvaluate, {kStageCompose}},
      {kStageReview, {kStageCompose}},
  };
  auto it = deps.find(stage);
  if (it == deps.end()) throw ConfigError("unknown stage '" + stage + "'");
  return it->second;
}

bool is_known_stage(const std::string& stage) {
  try {
    stage_dependencies(stage);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

void check_dependencies(const DatasetManifest& manifest, const std::string& stage) {
  for (const auto& dep : stage_dependencies(stage)) {
    if (!manifest.stage_done(dep)) {
      throw DependencyError("stage '" + stage + "' requires stage '" + dep + "' to run first");
    }
  }
}

json StageReport::to_json() const {
  return json{{"stage", stage},       {"changed", changed},   {"processed", processed}, {"accepted", accepted},
              {"rejected", rejected}, {"reasons", reasons},   {"warnings", warnings},   {"details", details}};
}

std::string StageReport::render_text() const {
  std::ostringstream os;
  os << stage << ": processed " << processed << ", accepted " << accepted << ", rejected " << rejected
     << (changed ? "" : " (manifest unchanged)") << "\n";
  for (const auto& [reason, n] : reasons) os << "  rejected/" << reason << ": " << n << "\n";
  for (const auto& w : warnings) os << "  warning: " << w << "\n";
  return os.str();
}

namespace {

// Runs body(i) for i in [0, n) across OpenMP threads. The exception of the
// lowest failing index is rethrown so failures are reported deterministically.
template <typename Body>
void parallel_for_clips(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::size_t> entries_with_role(const DatasetManifest& m, ClipRole role) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    if (m.entries[i].role == role) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return m.entries[a].clip_id < m.entries[b].clip_id; });
  return idx;
}

fs::path root_of(const DatasetManifest& m, const char* role) {
  auto it = m.roots.find(role);
  if (it == m.roots.end()) throw DependencyError(std::string("manifest has no ") + role + " root; run ingest");
  return it->second;
}

const std::string& path_of(const ManifestEntry& e, const char* layer) {
  auto it = e.paths.find(layer);
  if (it == e.paths.end()) throw FormatError("manifest entry '" + e.clip_id + "' has no '" + layer + "' path");
  return it->second;
}

std::string clip_name(const std::string& video, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_c%03zu", index);
  return video + buf;
}

std::vector<std::string> source_videos(const fs::path& root) {
  std::vector<std::string> videos;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory() && fs::is_directory(d.path() / "frames")) videos.push_back(d.path().filename().string());
  }
  std::sort(videos.begin(), videos.end());
  return videos;
}

bool same_ingest_fields(const ManifestEntry& a, const ManifestEntry& b) {
  return a.clip_id == b.clip_id && a.role == b.role && a.split == b.split && a.source == b.source &&
         a.width == b.width && a.height == b.height && a.paths == b.paths;
}

}  // namespace

StageReport stage_ingest(DatasetManifest& manifest, const PipelineConfig& cfg) {
  StageReport report;
  report.stage = kStageIngest;
  const std::set<std::string> test_videos(cfg.test_video_ids.begin(), cfg.test_video_ids.end());

  std::vector<ManifestEntry> fresh;
  std::map<std::string, std::string> video_role;
  int clips_per_role[2] = {0, 0};
  auto scan = [&](const fs::path& root, ClipRole role, int slot) {
    for (const auto& video : source_videos(root)) {
      ++report.processed;
      if (!video_role.emplace(video, to_string(role)).second) {
        throw ValidationError("video name '" + video + "' appears in both the background and foreground roots");
      }
      const auto files = list_frame_files(root / video / "frames");
      if (files.empty()) {
        report.warnings.push_back(video + ": no frames");
        ++report.reasons["no_frames"];
        ++report.rejected;
        continue;
      }
      const auto header = png::read_header(files.front());
      const auto spans = segment_into_clips(static_cast<int>(files.size()), cfg.clip_len, cfg.stride, video);
      if (spans.empty()) {
        report.warnings.push_back(video + ": " + std::to_string(files.size()) + " frames, shorter than one clip");
        ++report.reasons["too_short"];
        ++report.rejected;
        continue;
      }
      for (std::size_t i = 0; i < spans.size(); ++i) {
        ManifestEntry e;
        e.clip_id = clip_name(video, i);
        e.role = role;
        e.split = test_videos.count(video) ? "test" : "train";
        e.source = spans[i];
        e.width = header.width;
        e.height = header.height;
        e.paths["frames"] = video + "/frames";
        if (role == ClipRole::background) {
          e.paths["counts"] = video + "/counts.json";
        } else {
          e.paths["masks"] = video + "/masks";
        }
        fresh.push_back(std::move(e));
        ++clips_per_role[slot];
      }
      ++report.accepted;
    }
  };
  scan(cfg.paths.background_root, ClipRole::background, 0);
  scan(cfg.paths.foreground_root, ClipRole::foreground, 1);

  std::map<std::string, const ManifestEntry*> old;
  for (const auto& e : manifest.entries) old[e.clip_id] = &e;
  std::vector<ManifestEntry> next;
  std::set<std::string> kept_ids;
  for (auto& e : fresh) {
    auto it = old.find(e.clip_id);
    if (it != old.end() && same_ingest_fields(*it->second, e)) {
      next.push_back(*it->second);
    } else {
      next.push_back(std::move(e));
    }
    kept_ids.insert(next.back().clip_id);
  }
  for (const auto& e : manifest.entries) {
    if (e.role != ClipRole::composite) continue;
    if (e.background_id && kept_ids.count(*e.background_id) && e.foreground_id && kept_ids.count(*e.foreground_id)) {
      next.push_back(e);
    } else {
      report.warnings.push_back("dropped composite " + e.clip_id + ": its source clips are gone");
    }
  }
  manifest.entries = std::move(next);
  manifest.roots["background"] = fs::absolute(cfg.paths.background_root).lexically_normal().string();
  manifest.roots["foreground"] = fs::absolute(cfg.paths.foreground_root).lexically_normal().string();
  report.details = {{"background_clips", clips_per_role[0]}, {"foreground_clips", clips_per_role[1]}};
  return report;
}

StageReport stage_filter_bg(DatasetManifest& manifest, const PipelineConfig& cfg) {
  StageReport report;
  report.stage = kStageFilterBg;
  const fs::path root = root_of(manifest, "background");
  const auto idx = entries_with_role(manifest, ClipRole::background);
  std::vector<FilterVerdict> verdicts(idx.size());
  parallel_for_clips(idx.size(), [&](std::size_t k) {
    const ManifestEntry& e = manifest.entries[idx[k]];
    const FrameSequence seq = load_frame_span(root / path_of(e, "frames"), e.source, e.clip_id);
    const auto counts = load_person_counts(root / path_of(e, "counts"));
    if (counts.size() < static_cast<std::size_t>(e.source.end_frame)) {
      throw FormatError(e.clip_id + ": person counts cover " + std::to_string(counts.size()) +
                        " frames, clip ends at frame " + std::to_string(e.source.end_frame));
    }
    const std::vector<int> slice(counts.begin() + e.source.start_frame, counts.begin() + e.source.end_frame);
    verdicts[k] = evaluate_background(seq, slice, cfg.filter);
  });
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const FilterVerdict& v = verdicts[k];
    manifest.entries[idx[k]].filter = v;
    ++report.processed;
    if (v.passed) {
      ++report.accepted;
      continue;
    }
    ++report.rejected;
    if (!v.luminance_passed) ++report.reasons["luminance"];
    if (!v.transitions_passed) ++report.reasons["scene_transition"];
    if (!v.person_passed) ++report.reasons["person_count"];
  }
  return report;
}

StageReport stage_select_fg(DatasetManifest& manifest, const PipelineConfig& cfg) {
  StageReport report;
  report.stage = kStageSelectFg;
  const fs::path root = root_of(manifest, "foreground");
  const auto idx = entries_with_role(manifest, ClipRole::foreground);
  std::vector<CrowdStats> stats(idx.size());
  std::vector<std::vector<std::string>> warnings(idx.size());
  parallel_for_clips(idx.size(), [&](std::size_t k) {
    const ManifestEntry& e = manifest.entries[idx[k]];
    const auto masks = load_instance_mask_span(root / path_of(e, "masks"), e.source, &warnings[k]);
    stats[k] = crowd_stats(masks);
  });

  std::map<std::string, std::vector<std::pair<std::string, int>>> candidates;  // per split
  for (std::size_t k = 0; k < idx.size(); ++k) {
    ManifestEntry& e = manifest.entries[idx[k]];
    for (const auto& w : warnings[k]) report.warnings.push_back(e.clip_id + ": " + w);
    e.masked_frame_count = stats[k].masked_frame_count;
    e.crowd_percent = stats[k].crowd_percent;
    e.crowd_bin = stats[k].crowd_bin;
    e.selected = false;
    ++report.processed;
    if (stats[k].masked_frame_count < cfg.selection.min_masked_frames) {
      ++report.reasons["too_few_masked_frames"];
    } else if (!stats[k].crowd_bin) {
      ++report.reasons["crowd_above_50"];
    } else {
      candidates[e.split].emplace_back(e.clip_id, *stats[k].crowd_bin);
    }
  }

  SelectionConfig sel = cfg.selection;
  sel.seed = cfg.master_seed;
  for (const auto& [split, list] : candidates) {
    const SelectionResult r = stratified_sample(list, sel);
    for (const auto& id : r.selected) manifest.find(id)->selected = true;
    json bins = json::array();
    for (int b = 0; b < kCrowdBinCount; ++b) {
      const auto& br = r.bins[static_cast<std::size_t>(b)];
      bins.push_back({{"bin", bin_label(b)},
                      {"available", br.available},
                      {"selected", br.selected},
                      {"shortfall", br.shortfall}});
    }
    report.details[split] = bins;
    for (const auto& w : r.warnings) report.warnings.push_back(split + ": " + w);
    report.accepted += static_cast<int>(r.selected.size());
    const int unsampled = static_cast<int>(list.size() - r.selected.size());
    if (unsampled > 0) report.reasons["not_sampled"] += unsampled;
  }
  report.rejected = report.processed - report.accepted;
  return report;
}

std::string composite_id(const std::string& foreground_id) { return "comp_" + foreground_id; }

std::optional<std::string> choose_background(const DatasetManifest& manifest, const ManifestEntry& fg,
                                             std::uint64_t master_seed) {
  std::vector<std::string> pool;
  for (const auto& e : manifest.entries) {
    if (e.role != ClipRole::background || !e.filter || !e.filter->passed) continue;
    if (e.review.status == ReviewStatus::rejected) continue;
    if (e.width != fg.width || e.height != fg.height || e.split != fg.split) continue;
    if (e.source.length() != fg.source.length()) continue;
    pool.push_back(e.clip_id);
  }
  if (pool.empty()) return std::nullopt;
  std::sort(pool.begin(), pool.end());
  SeededRng rng(derive_clip_seed(master_seed, "pair/" + fg.clip_id));
  return pool[rng.index(pool.size())];
}

namespace {

bool triplet_present(const fs::path& dir, int frames) {
  for (const char* layer : {"input", "mask", "gt"}) {
    if (!fs::is_directory(dir / layer)) return false;
    if (static_cast<int>(list_frame_files(dir / layer).size()) != frames) return false;
  }
  return true;
}

bool same_plan(const ManifestEntry& a, const ManifestEntry& b) {
  return a.background_id == b.background_id && a.foreground_id == b.foreground_id && a.shadow == b.shadow &&
         a.seed == b.seed && a.source == b.source && a.split == b.split && a.width == b.width &&
         a.height == b.height;
}

}  // namespace

StageReport stage_compose(DatasetManifest& manifest, const PipelineConfig& cfg, const StageOptions& opts) {
  StageReport report;
  report.stage = kStageCompose;
  const fs::path bg_root = root_of(manifest, "background");
  const fs::path fg_root = root_of(manifest, "foreground");
  const fs::path out_root = cfg.paths.output_root;

  std::vector<ManifestEntry> plan;
  for (std::size_t i : entries_with_role(manifest, ClipRole::foreground)) {
    const ManifestEntry& fg = manifest.entries[i];
    if (!fg.selected || fg.review.status == ReviewStatus::rejected) continue;
    ++report.processed;
    const auto bg = choose_background(manifest, fg, cfg.master_seed);
    if (!bg) {
      ++report.rejected;
      ++report.reasons["no_background"];
      report.warnings.push_back(fg.clip_id + ": no accepted background with matching resolution and split");
      continue;
    }
    ManifestEntry c;
    c.clip_id = composite_id(fg.clip_id);
    c.role = ClipRole::composite;
    c.split = fg.split;
    c.source = fg.source;
    c.width = fg.width;
    c.height = fg.height;
    c.background_id = bg;
    c.foreground_id = fg.clip_id;
    c.seed = derive_clip_seed(cfg.master_seed, c.clip_id);
    c.shadow = sample_shadow_params(*c.seed, cfg.shadow, c.height);
    for (const char* layer : {"input", "mask", "gt"}) c.paths[layer] = c.clip_id + "/" + layer;
    plan.push_back(std::move(c));
  }

  std::vector<std::size_t> todo;
  int reused = 0;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    ManifestEntry& c = plan[k];
    const ManifestEntry* prev = manifest.find(c.clip_id);
    const fs::path dir = out_root / c.clip_id;
    if (prev && prev->role == ClipRole::composite && same_plan(*prev, c) && triplet_present(dir, c.source.length()) &&
        prev->crowd_percent) {
      c = *prev;
      ++reused;
      continue;
    }
    if (fs::exists(dir) && !fs::is_empty(dir) && !opts.force) {
      throw ValidationError(dir.string() + " already exists with different content; rerun compose with --force");
    }
    todo.push_back(k);
  }

  parallel_for_clips(todo.size(), [&](std::size_t j) {
    ManifestEntry& c = plan[todo[j]];
    const ManifestEntry& bg = *manifest.find(*c.background_id);
    const ManifestEntry& fg = *manifest.find(*c.foreground_id);
    const FrameSequence bg_frames = load_frame_span(bg_root / path_of(bg, "frames"), bg.source, bg.clip_id);
    const FrameSequence fg_frames = load_frame_span(fg_root / path_of(fg, "frames"), fg.source, fg.clip_id);
    const auto fg_masks = load_instance_mask_span(fg_root / path_of(fg, "masks"), fg.source);
    const Triplet t = compose_triplet(bg_frames, fg_masks, fg_frames, *c.shadow, c.clip_id);
    write_triplet(t, out_root / c.clip_id, opts.force);
    const long long area = static_cast<long long>(c.width) * c.height;
    c.masked_frame_count = masked_frame_count(t.mask);
    c.crowd_percent = crowd_percent(t.mask, area);
    c.crowd_bin = assign_bin(*c.crowd_percent);
  });

  std::set<std::string> planned;
  for (const auto& c : plan) planned.insert(c.clip_id);
  std::vector<ManifestEntry> next;
  for (auto& e : manifest.entries) {
    if (e.role != ClipRole::composite) {
      next.push_back(std::move(e));
    } else if (!planned.count(e.clip_id)) {
      report.warnings.push_back("composite " + e.clip_id + " is no longer planned; its directory was left in place");
    }
  }
  for (auto& c : plan) next.push_back(std::move(c));
  manifest.entries = std::move(next);

  report.accepted = static_cast<int>(planned.size());
  report.details = {{"composed", todo.size()}, {"reused", reused}};
  return report;
}

namespace {

// Stages whose (transitive) dependencies include `stage`.
std::vector<std::string> downstream_of(const std::string& stage) {
  std::vector<std::string> out;
  for (const char* s : {kStageIngest, kStageFilterBg, kStageSelectFg, kStageCompose, kStageEvaluate, kStageReview}) {
    std::vector<std::string> frontier = stage_dependencies(s);
    std::set<std::string> seen;
    bool hit = false;
    while (!frontier.empty() && !hit) {
      const std::string d = frontier.back();
      frontier.pop_back();
      if (!seen.insert(d).second) continue;
      if (d == stage) hit = true;
      for (const auto& dd : stage_dependencies(d)) frontier.push_back(dd);
    }
    if (hit) out.push_back(s);
  }
  return out;
}

json content_of(DatasetManifest m) {
  m.stages_completed.clear();
  m.sort_entries();
  return manifest_to_json(m);
}

}  // namespace

StageReport run_stage(const std::string& stage, const PipelineConfig& cfg, const StageOptions& opts) {
  cfg.validate();
  if (!is_known_stage(stage)) throw ConfigError("unknown stage '" + stage + "'");
  if (stage == kStageEvaluate || stage == kStageReview) {
    throw ConfigError("stage '" + stage + "' does not produce manifest state; use its own entry point");
  }
  const fs::path manifest_path = cfg.paths.manifest_path();
  DatasetManifest manifest;
  if (fs::exists(manifest_path)) {
    manifest = read_manifest(manifest_path);
  } else if (stage != kStageIngest) {
    throw DependencyError("stage '" + stage + "' requires stage 'ingest' to run first (no manifest at " +
                          manifest_path.string() + ")");
  }
  check_dependencies(manifest, stage);

  const fs::path log_path = decision_log_path(manifest_path);
  if (fs::exists(log_path)) apply_decisions(manifest, fold_decisions(DecisionLog(log_path).replay()));

  const json before = content_of(manifest);
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
  manifest.master_seed = cfg.master_seed;
  fs::create_directories(cfg.paths.output_root);

  StageReport report;
  if (stage == kStageIngest) {
    report = stage_ingest(manifest, cfg);
  } else if (stage == kStageFilterBg) {
    report = stage_filter_bg(manifest, cfg);
  } else if (stage == kStageSelectFg) {
    report = stage_select_fg(manifest, cfg);
  } else {
    report = stage_compose(manifest, cfg, opts);
  }
  manifest.sort_entries();
  report.changed = content_of(manifest) != before;
  if (report.changed) {
    for (const auto& s : downstream_of(stage)) {
      auto& done = manifest.stages_completed;
      done.erase(std::remove(done.begin(), done.end(), s), done.end());
    }
  }
  manifest.mark_stage(stage);
  write_manifest(manifest, manifest_path);
  return report;
}

// --- evaluate ----------------------------------------------------------------

namespace {

FrameSequence load_prediction(const fs::path& root, const std::string& clip_id) {
  fs::path dir = root / clip_id;
  if (!fs::is_directory(dir)) throw ValidationError("no prediction for clip " + clip_id + " under " + root.string());
  if (list_frame_files(dir).empty()) {
    for (const char* sub : {"frames", "input"}) {
      if (fs::is_directory(dir / sub)) {
        dir /= sub;
        break;
      }
    }
  }
  FrameSequence seq = load_frame_sequence(dir);
  seq.clip_id = clip_id;
  return seq;
}

std::vector<Mask> load_masks(const fs::path& dir) {
  std::vector<Mask> masks;
  for (const auto& f : list_frame_files(dir)) masks.push_back(png::read_mask(f));
  return masks;
}

}  // namespace

EvaluateResult run_evaluate(const DatasetManifest& manifest, const fs::path& manifest_path,
                            const EvaluateOptions& opts, int workers) {
  check_dependencies(manifest, kStageEvaluate);
  if (opts.predictions.empty()) throw ConfigError("evaluate needs at least one prediction root");
  const fs::path gt_root = opts.gt_root.empty() ? manifest_path.parent_path() : opts.gt_root;
  if (workers > 0) omp_set_num_threads(workers);

  std::vector<const ManifestEntry*> clips;
  for (std::size_t i : entries_with_role(manifest, ClipRole::composite)) {
    const ManifestEntry& e = manifest.entries[i];
    if (opts.split && e.split != *opts.split) continue;
    clips.push_back(&e);
  }
  if (clips.empty()) throw EmptyInputError("no composite clips to evaluate");

  EvaluateResult result;
  std::vector<std::pair<std::string, std::vector<ClipScore>>> methods;
  for (const auto& [method, pred_root] : opts.predictions) {
    std::vector<ClipScore> scores(clips.size());
    std::vector<std::string> notes(clips.size());
    parallel_for_clips(clips.size(), [&](std::size_t k) {
      const ManifestEntry& e = *clips[k];
      const FrameSequence gt = load_frame_sequence(gt_root / path_of(e, "gt"));
      const auto mask = load_masks(gt_root / path_of(e, "mask"));
      const FrameSequence pred = load_prediction(pred_root, e.clip_id);
      ClipScore s;
      s.clip_id = e.clip_id;
      const ManifestEntry* bg = e.background_id ? manifest.find(*e.background_id) : nullptr;
      s.scene = bg ? bg->source.source_video_id : e.background_id.value_or("");
      s.crowd_bin = e.crowd_bin;
      s.psnr_db = psnr(pred, gt);
      try {
        s.in_mask_psnr_db = in_mask_psnr(pred, gt, mask);
      } catch (const UndefinedMetricError&) {
        notes[k] = e.clip_id + ": empty mask, in-mask PSNR undefined";
      }
      s.ssim = clip_ssim(pred, gt);
      scores[k] = std::move(s);
    });
    for (const auto& n : notes) {
      if (!n.empty()) result.warnings.push_back(method + ": " + n);
    }
    for (const auto& [metric, command] : opts.scorers) {
      std::vector<ScorerRequest> requests;
      for (const auto* e : clips) {
        requests.push_back({e->clip_id, pred_root / e->clip_id, gt_root / path_of(*e, "gt")});
      }
      const ScorerResult r = run_external_scorer(command, requests);
      for (auto& s : scores) {
        if (auto it = r.scores.find(s.clip_id); it != r.scores.end()) s.perceptual[metric] = it->second;
      }
      for (const auto& id : r.missing) {
        result.warnings.push_back(method + ": scorer '" + metric + "' returned no score for " + id);
      }
    }
    result.scores[method] = scores;
    methods.emplace_back(method, std::move(scores));
  }
  result.table = build_report(methods);
  return result;
}

}  // namespace crowdforge
