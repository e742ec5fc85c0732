#include "dacdet/synth/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dacdet::synth {

void DegradationParams::validate(int image_width) const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("degradation: " + what); };
  if (!(blur_sigma >= 0)) fail("blur_sigma must be >= 0");
  if (!(contrast_scale > 0 && contrast_scale <= 1)) fail("contrast_scale must be in (0, 1]");
  if (!std::isfinite(brightness_offset)) fail("brightness_offset must be finite");
  if (!(noise_std >= 0)) fail("noise_std must be >= 0");
  if (!(vignette_strength >= 0 && vignette_strength < 1)) fail("vignette_strength must be in [0, 1)");
  const double max_shift = 0.03 * image_width;
  if (!(std::hypot(shift_dx, shift_dy) <= max_shift + 1e-12)) {
    fail("shift (" + std::to_string(shift_dx) + ", " + std::to_string(shift_dy) + ") exceeds 3% of width (" +
         std::to_string(max_shift) + " px)");
  }
}

Image translate(const Image& image, double dx, double dy) {
  if (dx == 0 && dy == 0) return image;
  Image out(image.channels, image.height, image.width);
  const double fdx = std::floor(dx);
  const double fdy = std::floor(dy);
  const double wx = dx - fdx;
  const double wy = dy - fdy;
  auto sample = [&](int c, int y, int x) {
    y = std::clamp(y, 0, image.height - 1);
    x = std::clamp(x, 0, image.width - 1);
    return static_cast<double>(image.at(c, y, x));
  };
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      // Output (x, y) reads source (x - dx, y - dy).
      const int sy = y - static_cast<int>(fdy);
      for (int x = 0; x < image.width; ++x) {
        const int sx = x - static_cast<int>(fdx);
        double v = (1 - wx) * (1 - wy) * sample(c, sy, sx);
        if (wx > 0) v += wx * (1 - wy) * sample(c, sy, sx - 1);
        if (wy > 0) v += (1 - wx) * wy * sample(c, sy - 1, sx);
        if (wx > 0 && wy > 0) v += wx * wy * sample(c, sy - 1, sx - 1);
        out.at(c, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Image gaussian_blur(const Image& image, double sigma) {
  if (sigma <= 0) return image;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-(i * i) / (2 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  Image tmp(image.channels, image.height, image.width);
  Image out(image.channels, image.height, image.width);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] * image.at(c, y, std::clamp(x + i, 0, image.width - 1));
        }
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(c, std::clamp(y + i, 0, image.height - 1), x);
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image degrade(const Image& image, const DegradationParams& params, Rng& rng) {
  Image out = translate(image, params.shift_dx, params.shift_dy);
  out = gaussian_blur(out, params.blur_sigma);

  const bool tone = params.contrast_scale != 1 || params.brightness_offset != 0;
  const double cy = (out.height - 1) / 2.0;
  const double cx = (out.width - 1) / 2.0;
  const double r_max2 = cx * cx + cy * cy;
  std::normal_distribution<double> noise(0.0, params.noise_std > 0 ? params.noise_std : 1.0);
  for (int c = 0; c < out.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        float& p = out.at(c, y, x);
        double v = p;
        if (tone) v = 0.5 + params.contrast_scale * (v - 0.5) + params.brightness_offset;
        if (params.noise_std > 0) v += noise(rng);
        if (params.vignette_strength > 0) {
          const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / r_max2;
          v *= 1 - params.vignette_strength * r2;
        }
        p = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace dacdet::synth
