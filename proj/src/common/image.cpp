#include "dacdet/common/image.hpp"

#include <algorithm>
#include <cmath>

namespace dacdet {

void quantize_8bit(Image& image) {
  for (float& v : image.pixels) {
    float c = std::clamp(v, 0.0f, 1.0f);
    v = static_cast<float>(std::lround(c * 255.0f)) / 255.0f;
  }
}

Image resize_bilinear(const Image& src, int height, int width) {
  Image dst(src.channels, height, width);
  const double sy = static_cast<double>(src.height) / height;
  const double sx = static_cast<double>(src.width) / width;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        double top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        double bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        dst.at(c, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return dst;
}

}  // namespace dacdet
