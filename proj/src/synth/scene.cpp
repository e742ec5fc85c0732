#include "dacdet/synth/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "dacdet/common/rng.hpp"

namespace dacdet::synth {

namespace {

constexpr std::array<float, 3> kBackground{0.93f, 0.87f, 0.89f};
constexpr std::array<float, 3> kCellColor{0.86f, 0.60f, 0.66f};
constexpr std::array<float, 3> kStain{0.36f, 0.16f, 0.47f};
constexpr float kCellAlpha = 0.55f;

// Per-glyph shape parameters, drawn from a stream derived from the scene seed
// and parasite index.
struct GlyphShape {
  double phase_a = 0;
  double phase_b = 0;
  int n_dots = 0;
  std::array<double, 8> dot_jitter{};
};

GlyphShape draw_glyph_shape(uint64_t scene_seed, std::size_t index) {
  Rng rng(derive_seed(scene_seed, 0x6c79ULL, index));
  GlyphShape g;
  g.phase_a = uniform(rng, 0.0, 2 * std::numbers::pi);
  g.phase_b = uniform(rng, 0.0, 2 * std::numbers::pi);
  g.n_dots = uniform_int(rng, 4, 8);
  for (double& j : g.dot_jitter) j = uniform(rng, -0.25, 0.25);
  return g;
}

// Coverage test in the glyph's local frame (u along orientation), radius r.
bool glyph_contains(ParasiteClass cls, const GlyphShape& g, double u, double v, double r) {
  const double d = std::hypot(u, v);
  switch (cls) {
    case ParasiteClass::Ring: {
      if (d >= 0.6 * r && d <= r) return true;
      return std::hypot(u - 0.75 * r, v) <= 0.3 * r;
    }
    case ParasiteClass::Trophozoite: {
      const double phi = std::atan2(v, u);
      const double rho = r * (0.78 + 0.14 * std::sin(2 * phi + g.phase_a) + 0.08 * std::sin(3 * phi + g.phase_b));
      return d <= rho;
    }
    case ParasiteClass::Schizont: {
      const double dot_r = 0.28 * r;
      for (int k = 0; k < g.n_dots; ++k) {
        const double a = 2 * std::numbers::pi * k / g.n_dots + g.dot_jitter[static_cast<std::size_t>(k)];
        const double du = u - 0.62 * r * std::cos(a);
        const double dv = v - 0.62 * r * std::sin(a);
        if (std::hypot(du, dv) <= dot_r) return true;
      }
      return false;
    }
    case ParasiteClass::Gametocyte: {
      const double a = r;
      const double b = 0.55 * r;
      const bool outer = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
      const double ia = 0.85 * r;
      const double ib = 0.42 * r;
      const double vv = v - 0.32 * r;
      const bool inner = (u * u) / (ia * ia) + (vv * vv) / (ib * ib) <= 1.0;
      return outer && !inner;
    }
  }
  return false;
}

void blend(Image& img, int y, int x, const std::array<float, 3>& color, float alpha) {
  for (int c = 0; c < img.channels; ++c) {
    float& p = img.at(c, y, x);
    p = p * (1 - alpha) + color[static_cast<std::size_t>(c % 3)] * alpha;
  }
}

}  // namespace

SceneSpec::SceneSpec(uint64_t seed, int image_size, int n_cells, std::vector<ParasiteSpec> parasites,
                     double radius_min, double radius_max)
    : seed_(seed), image_size_(image_size), n_cells_(n_cells), parasites_(std::move(parasites)) {
  if (image_size_ < 8) throw SceneError("scene: image_size must be >= 8, got " + std::to_string(image_size_));
  if (n_cells_ < 0) throw SceneError("scene: n_cells must be >= 0");
  if (!(radius_min > 0) || radius_max < radius_min) throw SceneError("scene: invalid radius range");
  for (std::size_t i = 0; i < parasites_.size(); ++i) {
    const auto& p = parasites_[i];
    if (!(p.cx >= 0 && p.cx < image_size_ && p.cy >= 0 && p.cy < image_size_)) {
      throw SceneError("scene: parasite " + std::to_string(i) + " center (" + std::to_string(p.cx) + ", " +
                       std::to_string(p.cy) + ") outside canvas of size " + std::to_string(image_size_));
    }
    if (p.radius < radius_min || p.radius > radius_max) {
      throw SceneError("scene: parasite " + std::to_string(i) + " radius " + std::to_string(p.radius) +
                       " outside [" + std::to_string(radius_min) + ", " + std::to_string(radius_max) + "]");
    }
  }
}

RenderedScene render_scene(const SceneSpec& spec) {
  const int size = spec.image_size();
  const double unit = size / 64.0;
  Rng rng(spec.seed());
  Image img(3, size, size);

  // Low-frequency stain texture plus fine grain.
  std::array<double, 6> waves{};
  for (double& w : waves) w = uniform(rng, 0.0, 2 * std::numbers::pi);
  const double fx = uniform(rng, 1.0, 3.0) * 2 * std::numbers::pi / size;
  const double fy = uniform(rng, 1.0, 3.0) * 2 * std::numbers::pi / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double tex = 0.018 * std::sin(fx * x + waves[0]) * std::cos(fy * y + waves[1]) +
                         0.012 * std::sin(fx * 0.7 * (x + y) + waves[2]);
      const double grain = uniform(rng, -0.01, 0.01);
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(kBackground[static_cast<std::size_t>(c)] + tex + grain);
      }
    }
  }

  // Red blood cells: translucent discs with a paler center.
  for (int i = 0; i < spec.n_cells(); ++i) {
    const double cx = uniform(rng, 0.0, size);
    const double cy = uniform(rng, 0.0, size);
    const double rad = uniform(rng, 5.0, 8.0) * unit;
    const int y0 = std::max(0, static_cast<int>(cy - rad - 1));
    const int y1 = std::min(size - 1, static_cast<int>(cy + rad + 1));
    const int x0 = std::max(0, static_cast<int>(cx - rad - 1));
    const int x1 = std::min(size - 1, static_cast<int>(cx + rad + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        if (d > rad) continue;
        const float alpha = kCellAlpha * static_cast<float>(d < 0.45 * rad ? 0.6 : 1.0);
        blend(img, y, x, kCellColor, alpha);
      }
    }
  }

  RenderedScene out;
  for (std::size_t i = 0; i < spec.parasites().size(); ++i) {
    const auto& p = spec.parasites()[i];
    const GlyphShape shape = draw_glyph_shape(spec.seed(), i);
    const float alpha = static_cast<float>(uniform(rng, 0.82, 0.95));
    const double co = std::cos(p.orientation);
    const double so = std::sin(p.orientation);
    const int y0 = std::max(0, static_cast<int>(std::floor(p.cy - p.radius - 1)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(p.cy + p.radius + 1)));
    const int x0 = std::max(0, static_cast<int>(std::floor(p.cx - p.radius - 1)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(p.cx + p.radius + 1)));
    int min_x = size, min_y = size, max_x = -1, max_y = -1;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - p.cx;
        const double dy = y + 0.5 - p.cy;
        const double u = co * dx + so * dy;
        const double v = -so * dx + co * dy;
        if (!glyph_contains(p.cls, shape, u, v, p.radius)) continue;
        blend(img, y, x, kStain, alpha);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
    }
    Box box;
    if (max_x >= 0) {
      box = Box::from_corners(static_cast<int>(p.cls), static_cast<double>(min_x) / size,
                              static_cast<double>(min_y) / size, static_cast<double>(max_x + 1) / size,
                              static_cast<double>(max_y + 1) / size);
    } else {
      // Sub-pixel glyph: fall back to its geometric extent.
      box = Box::from_corners(static_cast<int>(p.cls), (p.cx - p.radius) / size, (p.cy - p.radius) / size,
                              (p.cx + p.radius) / size, (p.cy + p.radius) / size);
      clip_box(box);
    }
    out.boxes.push_back(quantize_box(box));
  }

  quantize_8bit(img);
  out.image = std::move(img);
  return out;
}

}  // namespace dacdet::synth
