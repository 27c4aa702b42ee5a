#include "crowdforge/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace crowdforge::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw IoError("cannot open " + path.string());
  }
  return f;
}

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  std::longjmp(png_jmpbuf(png), 1);
}

void on_png_warning(png_structp, png_const_charp) {}

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), file_(open_file(path, "rb")) {
    unsigned char sig[8] = {};
    if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
      throw FormatError(path.string() + ": not a PNG file");
    }
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_, on_png_error, on_png_warning);
    info_ = png_ ? png_create_info_struct(png_) : nullptr;
    if (!png_ || !info_) {
      throw IoError("libpng allocation failed");
    }
  }

  ~Reader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  // Decodes the file to rows of `channels` samples of `bytes_per_sample`.
  // `configure` may install libpng transforms after the header is known.
  template <typename Configure>
  std::vector<unsigned char> decode(Configure&& configure, Header& header) {
    std::vector<unsigned char> buffer;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png_))) {
      throw FormatError(path_.string() + ": " + error_);
    }
    png_init_io(png_, file_.get());
    png_set_sig_bytes(png_, 8);
    png_read_info(png_, info_);
    header.width = static_cast<int>(png_get_image_width(png_, info_));
    header.height = static_cast<int>(png_get_image_height(png_, info_));
    header.bit_depth = png_get_bit_depth(png_, info_);
    header.color_type = png_get_color_type(png_, info_);
    configure(png_, info_, header);
    png_read_update_info(png_, info_);
    const std::size_t rowbytes = png_get_rowbytes(png_, info_);
    buffer.resize(rowbytes * static_cast<std::size_t>(header.height));
    rows.resize(static_cast<std::size_t>(header.height));
    for (int y = 0; y < header.height; ++y) {
      rows[static_cast<std::size_t>(y)] = buffer.data() + rowbytes * static_cast<std::size_t>(y);
    }
    png_read_image(png_, rows.data());
    png_read_end(png_, nullptr);
    return buffer;
  }

 private:
  std::filesystem::path path_;
  FilePtr file_;
  std::string error_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

void write_png(const std::filesystem::path& path, int width, int height, int bit_depth, int color_type,
               std::span<const unsigned char> bytes, std::size_t rowbytes) {
  FilePtr file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng allocation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(bytes.data() + rowbytes * static_cast<std::size_t>(y));
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fast compression; frames are rewritten often and decode speed dominates.
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace

Header read_header(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char buf[33] = {};
  if (std::fread(buf, 1, sizeof buf, file.get()) != sizeof buf || png_sig_cmp(buf, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  auto be32 = [&](int off) {
    return (static_cast<std::uint32_t>(buf[off]) << 24) | (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 8) | static_cast<std::uint32_t>(buf[off + 3]);
  };
  Header h;
  h.width = static_cast<int>(be32(16));
  h.height = static_cast<int>(be32(20));
  h.bit_depth = buf[24];
  h.color_type = buf[25];
  return h;
}

Frame read_rgb(const std::filesystem::path& path) {
  Reader reader(path);
  Header header;
  auto bytes = reader.decode(
      [&](png_structp png, png_infop, const Header& h) {
        if (h.bit_depth == 16) {
          throw FormatError(path.string() + ": 16-bit color frames are not supported");
        }
        if (h.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (h.color_type == PNG_COLOR_TYPE_GRAY && h.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (h.color_type == PNG_COLOR_TYPE_GRAY || h.color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
          png_set_gray_to_rgb(png);
        }
        if (h.color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_set_strip_16(png);
      },
      header);
  Frame frame(header.width, header.height);
  if (bytes.size() != frame.data().size()) {
    throw FormatError(path.string() + ": unexpected decoded size");
  }
  std::copy(bytes.begin(), bytes.end(), frame.data().begin());
  return frame;
}

LabelFrame read_labels(const std::filesystem::path& path) {
  Reader reader(path);
  Header header;
  auto bytes = reader.decode(
      [&](png_structp png, png_infop, const Header& h) {
        if (h.color_type != PNG_COLOR_TYPE_GRAY) {
          throw FormatError(path.string() + ": instance masks must be single-channel grayscale");
        }
        if (h.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      },
      header);
  LabelFrame labels(header.width, header.height);
  auto out = labels.data();
  if (header.bit_depth == 16) {
    if (bytes.size() != out.size() * 2) throw FormatError(path.string() + ": unexpected decoded size");
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    }
  } else {
    if (bytes.size() != out.size()) throw FormatError(path.string() + ": unexpected decoded size");
    std::copy(bytes.begin(), bytes.end(), out.begin());
  }
  return labels;
}

Mask read_mask(const std::filesystem::path& path) {
  LabelFrame labels = read_labels(path);
  Mask mask(labels.width(), labels.height());
  auto in = labels.data();
  auto out = mask.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] != 0 ? 1 : 0;
  return mask;
}

void write_rgb(const Frame& frame, const std::filesystem::path& path) {
  write_png(path, frame.width(), frame.height(), 8, PNG_COLOR_TYPE_RGB, frame.data(),
            static_cast<std::size_t>(frame.width()) * 3);
}

void write_labels(const LabelFrame& labels, const std::filesystem::path& path) {
  auto in = labels.data();
  std::vector<unsigned char> bytes(in.size() * 2);
  // png_set_swap converts from host little-endian order.
  for (std::size_t i = 0; i < in.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(in[i] & 0xff);
    bytes[2 * i + 1] = static_cast<unsigned char>(in[i] >> 8);
  }
  write_png(path, labels.width(), labels.height(), 16, PNG_COLOR_TYPE_GRAY, bytes,
            static_cast<std::size_t>(labels.width()) * 2);
}

void write_mask(const Mask& mask, const std::filesystem::path& path) {
  auto in = mask.data();
  std::vector<unsigned char> bytes(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) bytes[i] = in[i] ? 255 : 0;
  write_png(path, mask.width(), mask.height(), 8, PNG_COLOR_TYPE_GRAY, bytes,
            static_cast<std::size_t>(mask.width()));
}

}  // namespace crowdforge::png
