#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crowdforge/errors.hpp"

namespace crowdforge {

// Dense row-major raster with interleaved channels.
template <typename T, int Channels>
class Raster {
 public:
  using value_type = T;
  static constexpr int channels = Channels;

  Raster() = default;
  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw ShapeError("raster dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<T> row(int y) noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_ * Channels,
            static_cast<std::size_t>(width_) * Channels};
  }
  std::span<const T> row(int y) const noexcept {
    return {data_.data() + static_cast<std::size_t>(y) * width_ * Channels,
            static_cast<std::size_t>(width_) * Channels};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// 8-bit RGB frame.
using Frame = Raster<std::uint8_t, 3>;
// 8-bit single-channel luma.
using GrayFrame = Raster<std::uint8_t, 1>;
// Binary raster holding strictly 0 or 1.
using Mask = Raster<std::uint8_t, 1>;
// Indexed instance raster: 0 is background, otherwise the instance id.
using LabelFrame = Raster<std::uint16_t, 1>;
// Soft shadow coverage in [0,1].
using ShadowFrame = Raster<float, 1>;

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
}

}  // namespace crowdforge
