#pragma once

#include <stdexcept>

#include "dacdet/common/image.hpp"
#include "dacdet/common/rng.hpp"

namespace dacdet::synth {

/// Low-cost-optics model applied to a clean rendering of the same field of view.
struct DegradationParams {
  double blur_sigma = 0;         // pixels, 0 disables
  double contrast_scale = 1;     // (0, 1], scaled about 0.5
  double brightness_offset = 0;  // intensity units
  double noise_std = 0;          // intensity units
  double shift_dx = 0;           // pixels, positive moves content right
  double shift_dy = 0;           // pixels, positive moves content down
  double vignette_strength = 0;  // [0, 1)

  /// Throws std::invalid_argument when out of range. |shift| is bounded by 3%
  /// of the image width.
  void validate(int image_width) const;
};

/// Translation, Gaussian blur, contrast about 0.5, brightness, additive
/// Gaussian noise, radial vignette, then clamp to [0, 1]. Identity parameters
/// return the input unchanged.
Image degrade(const Image& image, const DegradationParams& params, Rng& rng);

/// Translation with bilinear interpolation and edge replication; integer
/// shifts are exact pixel moves.
Image translate(const Image& image, double dx, double dy);

/// Separable Gaussian, radius ceil(3 sigma), clamped edges.
Image gaussian_blur(const Image& image, double sigma);

}  // namespace dacdet::synth
