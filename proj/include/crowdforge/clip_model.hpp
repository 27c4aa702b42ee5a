#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crowdforge/image.hpp"

namespace crowdforge {

// Frames per canonical clip. Every downstream frame-count threshold is
// expressed against this length.
inline constexpr int kCanonicalClipLength = 197;
inline constexpr double kNominalFps = 16.0;

struct FrameSequence {
  std::string clip_id;
  double fps = kNominalFps;
  std::vector<Frame> frames;

  std::size_t size() const noexcept { return frames.size(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }

  // Throws EmptyInputError / FormatError when the invariants do not hold.
  void validate() const;

  bool operator==(const FrameSequence&) const = default;
};

// Per-frame instance rasters. Instances are stored as indexed label frames
// (pixel value = instance id) so per-instance masks are derived on demand.
class InstanceMaskSequence {
 public:
  InstanceMaskSequence() = default;
  InstanceMaskSequence(std::vector<LabelFrame> frames, std::map<std::uint16_t, std::string> labels);

  std::size_t frame_count() const noexcept { return frames_.size(); }
  int width() const { return frames_.empty() ? 0 : frames_.front().width(); }
  int height() const { return frames_.empty() ? 0 : frames_.front().height(); }

  const LabelFrame& frame(std::size_t t) const { return frames_.at(t); }
  const std::vector<LabelFrame>& frames() const noexcept { return frames_; }
  const std::map<std::uint16_t, std::string>& labels() const noexcept { return labels_; }
  std::string label(std::uint16_t id) const;

  // Sorted ids present in frame t.
  std::vector<std::uint16_t> instance_ids(std::size_t t) const;
  Mask instance_mask(std::size_t t, std::uint16_t id) const;
  Mask union_mask(std::size_t t) const;

  bool operator==(const InstanceMaskSequence&) const = default;

 private:
  std::vector<LabelFrame> frames_;
  std::map<std::uint16_t, std::string> labels_;
};

// Half-open frame range [start_frame, end_frame) within one source video.
struct ClipSpan {
  std::string source_video_id;
  int start_frame = 0;
  int end_frame = 0;

  int length() const noexcept { return end_frame - start_frame; }
  bool operator==(const ClipSpan&) const = default;
};

// Maximal list of disjoint spans of clip_len frames, starting every `stride`
// frames. The trailing remainder is dropped.
std::vector<ClipSpan> segment_into_clips(int frame_count, int clip_len, int stride,
                                         const std::string& source_video_id = {});

// Frame files in a directory, sorted lexicographically (*.png only).
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);
std::filesystem::path frame_file_name(int index);

// Loads every frame of a directory. The clip id is the directory name, or the
// parent's name when the leaf is one of the canonical layer names
// (frames, input, gt).
FrameSequence load_frame_sequence(const std::filesystem::path& dir);
// Loads frames [span.start_frame, span.end_frame) of a source video directory.
FrameSequence load_frame_span(const std::filesystem::path& dir, const ClipSpan& span, std::string clip_id);
void save_frame_sequence(const FrameSequence& seq, const std::filesystem::path& dir);

// Loads one indexed mask per frame plus masks/labels.json. Ids missing from
// the label map are labeled "unknown" and reported through `warnings`.
InstanceMaskSequence load_instance_masks(const std::filesystem::path& dir, int frame_count,
                                         std::vector<std::string>* warnings = nullptr);
InstanceMaskSequence load_instance_mask_span(const std::filesystem::path& dir, const ClipSpan& span,
                                             std::vector<std::string>* warnings = nullptr);
void save_instance_masks(const InstanceMaskSequence& masks, const std::filesystem::path& dir);

// counts.json: a JSON array of per-frame person counts.
std::vector<int> load_person_counts(const std::filesystem::path& path);
void save_person_counts(const std::vector<int>& counts, const std::filesystem::path& path);

}  // namespace crowdforge
