#include "talksplat/image.hpp"

#include <cmath>

namespace talksplat::img {

std::uint8_t quantize8(double v) {
  if (!(v > 0.0)) return 0;  // also catches NaN
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

ImageGray luminance(const ImageRGB& im) {
  ImageGray g(im.height, im.width);
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      g.at(y, x) = 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) +
                   0.114 * im.at(y, x, 2);
  return g;
}

}  // namespace talksplat::img
