#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dacdet/common/box.hpp"
#include "dacdet/common/image.hpp"
#include "dacdet/common/rng.hpp"

namespace dacdet::augment {

/// An image with its detection labels; the unit every augmentation maps.
struct DetSample {
  Image image;
  std::vector<Box> boxes;
};

struct AugConfig {
  double crop_scale_min = 0.6;  // crop side as a fraction of the image side
  double crop_scale_max = 1.0;
  double mixup_prob = 0.1;
  double mixup_beta = 8.0;  // Beta(beta, beta) mixing coefficient
  double mosaic_prob = 0.25;
  double min_box_visibility = 0.25;

  void validate() const;
  nlohmann::json to_json() const;
  static AugConfig from_json(const nlohmann::json& j);
  /// No mosaic, no mixup, full-frame crop.
  static AugConfig disabled();
};

/// Square window in normalized coordinates: [x0, x0 + side] x [y0, y0 + side].
struct CropWindow {
  double x0 = 0;
  double y0 = 0;
  double side = 1;
};

/// Crops `window` and rescales it to the original resolution. Boxes move to
/// window coordinates and are clipped; a box keeping less than
/// `min_visibility` of its original area is dropped.
DetSample crop_scale(const DetSample& sample, const CropWindow& window, double min_visibility);
DetSample random_crop_scale(const DetSample& sample, const AugConfig& cfg, Rng& rng);

/// m * a + (1 - m) * b; labels are the union of both box lists at full weight.
/// m = 1 returns a and m = 0 returns b unchanged.
DetSample mixup_with(const DetSample& a, const DetSample& b, double m);
DetSample mixup(const DetSample& a, const DetSample& b, const AugConfig& cfg, Rng& rng);

/// Splits the canvas at the normalized center (cx, cy) and scales samples
/// 0..3 into the top-left, top-right, bottom-left and bottom-right quadrants.
DetSample mosaic_at(std::span<const DetSample> samples, double cx, double cy, double min_visibility);
DetSample mosaic(std::span<const DetSample> samples, const AugConfig& cfg, Rng& rng);

/// Mosaic with mosaic_prob (partners drawn from `pool`), then mixup with
/// mixup_prob (partner from `pool`), then random crop/scale.
DetSample augment_pipeline(const DetSample& sample, std::span<const DetSample> pool, const AugConfig& cfg, Rng& rng);

}  // namespace dacdet::augment
