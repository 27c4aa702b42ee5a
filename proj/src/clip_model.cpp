#include "crowdforge/clip_model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "crowdforge/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crowdforge {

void FrameSequence::validate() const {
  if (frames.empty()) {
    throw EmptyInputError("frame sequence '" + clip_id + "' has no frames");
  }
  const int w = frames.front().width();
  const int h = frames.front().height();
  if (w <= 0 || h <= 0) throw FormatError("frame sequence '" + clip_id + "' has empty frames");
  for (std::size_t t = 1; t < frames.size(); ++t) {
    if (frames[t].width() != w || frames[t].height() != h) {
      throw FormatError("frame sequence '" + clip_id + "': frame " + std::to_string(t) +
                        " has different dimensions");
    }
  }
}

InstanceMaskSequence::InstanceMaskSequence(std::vector<LabelFrame> frames,
                                           std::map<std::uint16_t, std::string> labels)
    : frames_(std::move(frames)), labels_(std::move(labels)) {
  for (std::size_t t = 1; t < frames_.size(); ++t) {
    if (!frames_[t].same_shape(frames_.front())) {
      throw FormatError("instance mask frame " + std::to_string(t) + " has different dimensions");
    }
  }
  if (labels_.contains(0)) {
    throw FormatError("instance id 0 is reserved for background");
  }
}

std::string InstanceMaskSequence::label(std::uint16_t id) const {
  auto it = labels_.find(id);
  return it == labels_.end() ? std::string("unknown") : it->second;
}

std::vector<std::uint16_t> InstanceMaskSequence::instance_ids(std::size_t t) const {
  std::vector<bool> seen(65536, false);
  for (std::uint16_t v : frame(t).data()) seen[v] = true;
  std::vector<std::uint16_t> ids;
  for (std::size_t id = 1; id < seen.size(); ++id) {
    if (seen[id]) ids.push_back(static_cast<std::uint16_t>(id));
  }
  return ids;
}

Mask InstanceMaskSequence::instance_mask(std::size_t t, std::uint16_t id) const {
  const LabelFrame& f = frame(t);
  Mask m(f.width(), f.height());
  auto in = f.data();
  auto out = m.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] == id ? 1 : 0;
  return m;
}

Mask InstanceMaskSequence::union_mask(std::size_t t) const {
  const LabelFrame& f = frame(t);
  Mask m(f.width(), f.height());
  auto in = f.data();
  auto out = m.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] != 0 ? 1 : 0;
  return m;
}

std::vector<ClipSpan> segment_into_clips(int frame_count, int clip_len, int stride,
                                         const std::string& source_video_id) {
  if (clip_len < 1) throw ConfigError("clip length must be at least 1");
  if (stride < clip_len) throw ConfigError("stride must be >= clip length (clips may not overlap)");
  std::vector<ClipSpan> spans;
  for (long long start = 0; start + clip_len <= frame_count; start += stride) {
    spans.push_back({source_video_id, static_cast<int>(start), static_cast<int>(start + clip_len)});
  }
  return spans;
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

fs::path frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d.png", index);
  return buf;
}

namespace {

std::string clip_id_from_dir(const fs::path& dir) {
  fs::path p = dir;
  if (!p.has_filename()) p = p.parent_path();
  const std::string leaf = p.filename().string();
  if ((leaf == "frames" || leaf == "input" || leaf == "gt") && p.has_parent_path()) {
    return p.parent_path().filename().string();
  }
  return leaf;
}

FrameSequence load_files(const std::vector<fs::path>& files, std::string clip_id) {
  if (files.empty()) throw EmptyInputError("no frames to load for clip '" + clip_id + "'");
  FrameSequence seq;
  seq.clip_id = std::move(clip_id);
  seq.frames.resize(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    seq.frames[i] = png::read_rgb(files[i]);
    if (i > 0 && !seq.frames[i].same_shape(seq.frames.front())) {
      throw FormatError(files[i].string() + ": dimensions differ from " + files.front().string());
    }
  }
  return seq;
}

std::map<std::uint16_t, std::string> load_label_map(const fs::path& path) {
  std::map<std::uint16_t, std::string> labels;
  if (!fs::exists(path)) return labels;
  std::ifstream in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw FormatError(path.string() + ": expected an object of id -> label");
  for (const auto& [key, value] : doc.items()) {
    unsigned id = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || ptr != key.data() + key.size() || id == 0 || id > 65535) {
      throw FormatError(path.string() + ": invalid instance id '" + key + "'");
    }
    if (!value.is_string()) throw FormatError(path.string() + ": label for id " + key + " must be a string");
    labels[static_cast<std::uint16_t>(id)] = value.get<std::string>();
  }
  return labels;
}

InstanceMaskSequence load_mask_files(const std::vector<fs::path>& files, const fs::path& dir,
                                     std::vector<std::string>* warnings) {
  auto known = load_label_map(dir / "labels.json");
  std::vector<LabelFrame> frames;
  frames.reserve(files.size());
  std::set<std::uint16_t> unknown;
  for (const auto& f : files) {
    frames.push_back(png::read_labels(f));
    if (!frames.back().same_shape(frames.front())) {
      throw FormatError(f.string() + ": mask dimensions differ from " + files.front().string());
    }
    for (std::uint16_t v : frames.back().data()) {
      if (v != 0 && !known.contains(v)) unknown.insert(v);
    }
  }
  for (std::uint16_t id : unknown) {
    if (warnings) {
      warnings->push_back(dir.string() + ": instance id " + std::to_string(id) +
                          " missing from labels.json; labeled 'unknown'");
    }
    known[id] = "unknown";
  }
  return InstanceMaskSequence(std::move(frames), std::move(known));
}

}  // namespace

FrameSequence load_frame_sequence(const fs::path& dir) {
  auto files = list_frame_files(dir);
  if (files.empty()) throw EmptyInputError("no frame files in " + dir.string());
  return load_files(files, clip_id_from_dir(dir));
}

FrameSequence load_frame_span(const fs::path& dir, const ClipSpan& span, std::string clip_id) {
  auto files = list_frame_files(dir);
  if (span.start_frame < 0 || span.end_frame <= span.start_frame ||
      static_cast<std::size_t>(span.end_frame) > files.size()) {
    throw FormatError(dir.string() + ": span [" + std::to_string(span.start_frame) + "," +
                      std::to_string(span.end_frame) + ") outside " + std::to_string(files.size()) + " frames");
  }
  std::vector<fs::path> slice(files.begin() + span.start_frame, files.begin() + span.end_frame);
  return load_files(slice, std::move(clip_id));
}

void save_frame_sequence(const FrameSequence& seq, const fs::path& dir) {
  seq.validate();
  fs::create_directories(dir);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    png::write_rgb(seq.frames[t], dir / frame_file_name(static_cast<int>(t)));
  }
}

InstanceMaskSequence load_instance_masks(const fs::path& dir, int frame_count, std::vector<std::string>* warnings) {
  auto files = list_frame_files(dir);
  if (static_cast<long long>(files.size()) != frame_count) {
    throw FormatError(dir.string() + ": " + std::to_string(files.size()) + " mask frames for a " +
                      std::to_string(frame_count) + "-frame clip");
  }
  if (files.empty()) return InstanceMaskSequence({}, load_label_map(dir / "labels.json"));
  return load_mask_files(files, dir, warnings);
}

InstanceMaskSequence load_instance_mask_span(const fs::path& dir, const ClipSpan& span,
                                             std::vector<std::string>* warnings) {
  auto files = list_frame_files(dir);
  if (span.start_frame < 0 || span.end_frame <= span.start_frame ||
      static_cast<std::size_t>(span.end_frame) > files.size()) {
    throw FormatError(dir.string() + ": mask span [" + std::to_string(span.start_frame) + "," +
                      std::to_string(span.end_frame) + ") outside " + std::to_string(files.size()) + " frames");
  }
  std::vector<fs::path> slice(files.begin() + span.start_frame, files.begin() + span.end_frame);
  return load_mask_files(slice, dir, warnings);
}

void save_instance_masks(const InstanceMaskSequence& masks, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < masks.frame_count(); ++t) {
    png::write_labels(masks.frame(t), dir / frame_file_name(static_cast<int>(t)));
  }
  json labels = json::object();
  for (const auto& [id, name] : masks.labels()) labels[std::to_string(id)] = name;
  std::ofstream out(dir / "labels.json");
  out << labels.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "labels.json").string());
}

std::vector<int> load_person_counts(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open person-count sidecar " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw FormatError(path.string() + ": expected an array of per-frame counts");
  std::vector<int> counts;
  counts.reserve(doc.size());
  for (const auto& v : doc) {
    if (!v.is_number_integer()) throw FormatError(path.string() + ": counts must be integers");
    counts.push_back(v.get<int>());
  }
  return counts;
}

void save_person_counts(const std::vector<int>& counts, const fs::path& path) {
  std::ofstream out(path);
  out << json(counts).dump() << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace crowdforge
