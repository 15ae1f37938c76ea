#include "mdseg/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace mdseg {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

void write_png(const std::string& path, const uint8_t* data, int h, int w, int channels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("png: cannot open for writing", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png: writer allocation failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("png: info allocation failed", path);
  }
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("png: write error", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(data + static_cast<size_t>(y) * static_cast<size_t>(w) * channels);
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

// interleaved (H, W, C) byte rows
std::vector<uint8_t> read_png(const std::string& path, int channels, int* out_h, int* out_w) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("png: cannot open", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png: reader allocation failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("png: info allocation failed", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("png: read error", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);  // palettes, bit depths < 8, tRNS
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  png_byte color = png_get_color_type(png, info);
  if (channels == 3) {
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
  } else {
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  int h = static_cast<int>(png_get_image_height(png, info));
  int w = static_cast<int>(png_get_image_width(png, info));
  if (static_cast<int>(png_get_channels(png, info)) != channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("png: unexpected channel count", path);
  }
  std::vector<uint8_t> buf(static_cast<size_t>(h) * static_cast<size_t>(w) * channels);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<size_t>(y)] =
        buf.data() + static_cast<size_t>(y) * static_cast<size_t>(w) * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  *out_h = h;
  *out_w = w;
  return buf;
}

}  // namespace

void write_png_rgb(const std::string& path, const ArrayU8& image) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("png: want a (3, H, W) image");
  int h = image.dim(1), w = image.dim(2);
  std::vector<uint8_t> inter(static_cast<size_t>(h) * static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        inter[(static_cast<size_t>(y) * static_cast<size_t>(w) + x) * 3 + c] = image.at(c, y, x);
  write_png(path, inter.data(), h, w, 3);
}

void write_png_gray(const std::string& path, const ArrayU8& image) {
  if (image.ndim() != 2) throw std::invalid_argument("png: want an (H, W) image");
  write_png(path, image.data.data(), image.rows(), image.cols(), 1);
}

ArrayU8 read_png_rgb(const std::string& path) {
  int h = 0, w = 0;
  auto inter = read_png(path, 3, &h, &w);
  ArrayU8 out({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(c, y, x) = inter[(static_cast<size_t>(y) * static_cast<size_t>(w) + x) * 3 + c];
  return out;
}

ArrayU8 read_png_gray(const std::string& path) {
  int h = 0, w = 0;
  auto data = read_png(path, 1, &h, &w);
  return ArrayU8({h, w}, std::move(data));
}

}  // namespace mdseg
