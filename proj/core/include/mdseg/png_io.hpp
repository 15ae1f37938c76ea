#pragma once

#include <string>

#include "mdseg/array.hpp"

namespace mdseg {

// 8-bit PNG round trip.  RGB images are (3, H, W), grayscale masks (H, W).
void write_png_rgb(const std::string& path, const ArrayU8& image);
void write_png_gray(const std::string& path, const ArrayU8& image);
ArrayU8 read_png_rgb(const std::string& path);
ArrayU8 read_png_gray(const std::string& path);

}  // namespace mdseg
