#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dacdet/common/box.hpp"
#include "dacdet/common/image.hpp"

namespace dacdet::synth {

class SceneError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One parasite glyph in pixel coordinates.
struct ParasiteSpec {
  ParasiteClass cls = ParasiteClass::Ring;
  double cx = 0;
  double cy = 0;
  double radius = 0;
  double orientation = 0;  // radians
};

/// A validated, fully determined scene description. Construction rejects
/// parasites whose center lies outside the canvas or whose radius falls
/// outside [radius_min, radius_max].
class SceneSpec {
 public:
  SceneSpec(uint64_t seed, int image_size, int n_cells, std::vector<ParasiteSpec> parasites,
            double radius_min, double radius_max);

  uint64_t seed() const { return seed_; }
  int image_size() const { return image_size_; }
  int n_cells() const { return n_cells_; }
  const std::vector<ParasiteSpec>& parasites() const { return parasites_; }

 private:
  uint64_t seed_;
  int image_size_;
  int n_cells_;
  std::vector<ParasiteSpec> parasites_;
};

struct RenderedScene {
  Image image;
  std::vector<Box> boxes;  // one per parasite, in spec order
};

/// Background texture, translucent cell discs, one stained glyph per parasite.
/// Each box is the tight extent of the glyph's drawn pixels, quantized to the
/// on-disk precision. The image is quantized to 8 bits.
RenderedScene render_scene(const SceneSpec& spec);

}  // namespace dacdet::synth
