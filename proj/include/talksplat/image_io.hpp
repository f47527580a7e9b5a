#pragma once

#include <string>

#include "talksplat/image.hpp"

namespace talksplat::img {

// binary PPM (P6), 8-bit
void save_ppm(const std::string& path, const ImageRGB& im);
ImageRGB load_ppm(const std::string& path);

// PNG, 8-bit truecolor, zlib-deflated
void save_png(const std::string& path, const ImageRGB& im);
ImageRGB load_png(const std::string& path);

// dispatch on extension (.ppm / .png)
void save_image(const std::string& path, const ImageRGB& im);
ImageRGB load_image(const std::string& path);

}  // namespace talksplat::img
