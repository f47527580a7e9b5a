#pragma once

#include <cstdint>
#include <vector>

namespace talksplat::img {

// dense row-major float images; channel-interleaved for RGB
struct ImageRGB {
  int height = 0, width = 0;
  std::vector<double> px;  // [H,W,3]

  ImageRGB() = default;
  ImageRGB(int h, int w, double fill = 0.0)
      : height(h), width(w),
        px(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {}
  double& at(int y, int x, int c) {
    return px[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c)];
  }
  double at(int y, int x, int c) const {
    return px[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c)];
  }
  bool same_size(const ImageRGB& o) const {
    return height == o.height && width == o.width;
  }
};

struct ImageGray {
  int height = 0, width = 0;
  std::vector<double> px;  // [H,W]

  ImageGray() = default;
  ImageGray(int h, int w, double fill = 0.0)
      : height(h), width(w),
        px(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}
  double& at(int y, int x) {
    return px[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
              static_cast<std::size_t>(x)];
  }
  double at(int y, int x) const {
    return px[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
              static_cast<std::size_t>(x)];
  }
};

// quantization used by every 8-bit sink: clamp to [0,1], scale by 255,
// round half up
std::uint8_t quantize8(double v);

ImageGray luminance(const ImageRGB& im);  // Rec.601 weights

}  // namespace talksplat::img
