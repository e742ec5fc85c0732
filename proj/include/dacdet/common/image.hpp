#pragma once

#include <cstddef>
#include <vector>

namespace dacdet {

/// Planar C x H x W float image with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float& at(int c, int y, int x) { return pixels[index(c, y, x)]; }
  float at(int c, int y, int x) const { return pixels[index(c, y, x)]; }

  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.pixels == b.pixels;
  }
};

/// Snaps every value to the nearest k/255, the set representable in an 8-bit file.
void quantize_8bit(Image& image);

/// Bilinear resample of the full image to a new spatial size.
Image resize_bilinear(const Image& src, int height, int width);

}  // namespace dacdet
