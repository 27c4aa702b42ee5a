#pragma once

#include <filesystem>

#include "crowdforge/image.hpp"

namespace crowdforge::png {

// Reads an 8-bit PNG as RGB. Gray and palette images are expanded, alpha is
// dropped; 16-bit color is rejected because it cannot round-trip.
Frame read_rgb(const std::filesystem::path& path);

// Reads a grayscale PNG (8- or 16-bit) as instance ids.
LabelFrame read_labels(const std::filesystem::path& path);

// Reads a grayscale PNG and binarizes it (nonzero -> 1).
Mask read_mask(const std::filesystem::path& path);

// Reads only the header.
struct Header {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
};
Header read_header(const std::filesystem::path& path);

void write_rgb(const Frame& frame, const std::filesystem::path& path);
void write_labels(const LabelFrame& labels, const std::filesystem::path& path);
// Stored as 8-bit gray 0/255.
void write_mask(const Mask& mask, const std::filesystem::path& path);

}  // namespace crowdforge::png
