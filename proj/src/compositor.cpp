#include "crowdforge/compositor.hpp"

#include <exception>
#include <system_error>

#include "crowdforge/kernels.hpp"
#include "crowdforge/png_io.hpp"

namespace fs = std::filesystem;

namespace crowdforge {

void Triplet::validate() const {
  const std::size_t n = gt.frames.size();
  if (input.frames.size() != n || mask.size() != n) {
    throw ShapeError("triplet: input/mask/gt frame counts differ");
  }
  for (std::size_t t = 0; t < n; ++t) {
    require_same_shape(input.frames[t], gt.frames[t], "triplet");
    require_same_shape(mask[t], gt.frames[t], "triplet");
  }
}

Frame apply_shadow(const Frame& bg, const ShadowFrame& shadow, double alpha) {
  require_same_shape(bg, shadow, "apply_shadow");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("apply_shadow: alpha must lie in [0, 1]");
  return kernels::parallel::darken(bg, shadow, alpha);
}

Frame overlay_foreground(const Frame& darkened, const Frame& fg, const Mask& human_mask) {
  require_same_shape(darkened, fg, "overlay_foreground");
  require_same_shape(darkened, human_mask, "overlay_foreground");
  Frame out = darkened;
  const int w = out.width();
  const int h = out.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const auto m = human_mask.row(y);
    const auto src = fg.row(y);
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      if (!m[static_cast<std::size_t>(x)]) continue;
      for (int c = 0; c < 3; ++c) dst[static_cast<std::size_t>(3 * x + c)] = src[static_cast<std::size_t>(3 * x + c)];
    }
  }
  return out;
}

namespace {

Mask union_of(const LabelFrame& labels) {
  Mask m(labels.width(), labels.height());
  auto in = labels.data();
  auto out = m.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] != 0 ? 1 : 0;
  return m;
}

}  // namespace

Frame compose_frame(const Frame& bg, const Frame& fg, const LabelFrame& labels, const ShadowParams& params) {
  require_same_shape(bg, fg, "compose");
  require_same_shape(bg, labels, "compose");
  const ShadowFrame shadow = render_frame_shadow(labels, params);
  return overlay_foreground(apply_shadow(bg, shadow, params.alpha), fg, union_of(labels));
}

Triplet compose_triplet(const FrameSequence& bg, const InstanceMaskSequence& fg_masks, const FrameSequence& fg_frames,
                        const ShadowParams& params, std::string clip_id) {
  bg.validate();
  fg_frames.validate();
  const std::size_t n = bg.frames.size();
  if (fg_frames.frames.size() != n || fg_masks.frame_count() != n) {
    throw ShapeError("compose: background, foreground and masks must have the same frame count (" +
                     std::to_string(n) + ", " + std::to_string(fg_frames.frames.size()) + ", " +
                     std::to_string(fg_masks.frame_count()) + ")");
  }
  require_same_shape(bg.frames.front(), fg_frames.frames.front(), "compose");
  require_same_shape(bg.frames.front(), fg_masks.frame(0), "compose");

  Triplet t;
  t.gt = bg;
  if (!clip_id.empty()) t.gt.clip_id = clip_id;
  t.input.clip_id = t.gt.clip_id;
  t.input.fps = bg.fps;
  t.input.frames.resize(n);
  t.mask.resize(n);

  const int frames = static_cast<int>(n);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < frames; ++i) {
    try {
      const auto k = static_cast<std::size_t>(i);
      t.input.frames[k] = compose_frame(bg.frames[k], fg_frames.frames[k], fg_masks.frame(k), params);
      t.mask[k] = union_of(fg_masks.frame(k));
    } catch (...) {
#pragma omp critical(crowdforge_compose_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return t;
}

void write_triplet(const Triplet& triplet, const fs::path& out_dir, bool force) {
  triplet.validate();
  if (fs::exists(out_dir) && !(fs::is_directory(out_dir) && fs::is_empty(out_dir)) && !force) {
    throw IoError(out_dir.string() + " already exists; pass --force to overwrite");
  }
  fs::path staging = out_dir;
  staging += ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    for (const char* layer : {"input", "mask", "gt"}) fs::create_directories(staging / layer);
    for (std::size_t t = 0; t < triplet.frame_count(); ++t) {
      const fs::path name = frame_file_name(static_cast<int>(t));
      png::write_rgb(triplet.input.frames[t], staging / "input" / name);
      png::write_mask(triplet.mask[t], staging / "mask" / name);
      png::write_rgb(triplet.gt.frames[t], staging / "gt" / name);
    }
    if (fs::exists(out_dir)) fs::remove_all(out_dir);
    if (out_dir.has_parent_path()) fs::create_directories(out_dir.parent_path());
    fs::rename(staging, out_dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(std::string("write_triplet: ") + e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

Triplet load_triplet(const fs::path& dir) {
  Triplet t;
  t.input = load_frame_sequence(dir / "input");
  t.gt = load_frame_sequence(dir / "gt");
  for (const auto& f : list_frame_files(dir / "mask")) t.mask.push_back(png::read_mask(f));
  t.validate();
  return t;
}

}  // namespace crowdforge
