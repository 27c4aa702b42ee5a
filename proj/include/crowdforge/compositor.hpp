#pragma once

#include <filesystem>
#include <vector>

#include "crowdforge/clip_model.hpp"
#include "crowdforge/shadow.hpp"

namespace crowdforge {

// Supervised training tuple: composite input, union human mask (no shadow
// pixels), clean background.
struct Triplet {
  FrameSequence input;
  std::vector<Mask> mask;
  FrameSequence gt;

  std::size_t frame_count() const noexcept { return gt.frames.size(); }
  // Throws ShapeError when the three clips disagree in size.
  void validate() const;
  bool operator==(const Triplet&) const = default;
};

// out = round(bg * (1 - alpha * s)) per channel, clamped; s == 0 copies bg.
Frame apply_shadow(const Frame& bg, const ShadowFrame& shadow, double alpha);

// fg where the mask is set, darkened elsewhere. No boundary blending.
Frame overlay_foreground(const Frame& darkened, const Frame& fg, const Mask& human_mask);

// Composites one frame: shadow render, darken, overlay.
Frame compose_frame(const Frame& bg, const Frame& fg, const LabelFrame& labels, const ShadowParams& params);

Triplet compose_triplet(const FrameSequence& bg, const InstanceMaskSequence& fg_masks, const FrameSequence& fg_frames,
                        const ShadowParams& params, std::string clip_id = {});

// Writes <out_dir>/{input,mask,gt}/frame_%05d.png. An existing non-empty
// out_dir is refused unless `force`. Output is staged in a sibling directory
// and renamed into place, so a failed write leaves nothing behind.
void write_triplet(const Triplet& triplet, const std::filesystem::path& out_dir, bool force = false);
Triplet load_triplet(const std::filesystem::path& dir);

}  // namespace crowdforge
