#include "dacdet/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dacdet::augment {

using nlohmann::json;

void AugConfig::validate() const {
  auto prob_ok = [](double p) { return p >= 0 && p <= 1; };
  if (!(crop_scale_min > 0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1)) {
    throw std::invalid_argument("aug: crop_scale_range must satisfy 0 < min <= max <= 1");
  }
  if (!prob_ok(mixup_prob) || !prob_ok(mosaic_prob)) throw std::invalid_argument("aug: probabilities must be in [0, 1]");
  if (!(mixup_beta > 0)) throw std::invalid_argument("aug: mixup_beta must be > 0");
  if (!prob_ok(min_box_visibility)) throw std::invalid_argument("aug: min_box_visibility must be in [0, 1]");
}

json AugConfig::to_json() const {
  return json{{"crop_scale_range", {crop_scale_min, crop_scale_max}},
              {"mixup_prob", mixup_prob},
              {"mixup_beta", mixup_beta},
              {"mosaic_prob", mosaic_prob},
              {"min_box_visibility", min_box_visibility}};
}

AugConfig AugConfig::from_json(const json& j) {
  AugConfig c;
  if (j.contains("crop_scale_range")) {
    const auto& r = j.at("crop_scale_range");
    if (!r.is_array() || r.size() != 2) throw std::invalid_argument("aug: crop_scale_range must be [min, max]");
    c.crop_scale_min = r[0].get<double>();
    c.crop_scale_max = r[1].get<double>();
  }
  c.mixup_prob = j.value("mixup_prob", c.mixup_prob);
  c.mixup_beta = j.value("mixup_beta", c.mixup_beta);
  c.mosaic_prob = j.value("mosaic_prob", c.mosaic_prob);
  c.min_box_visibility = j.value("min_box_visibility", c.min_box_visibility);
  c.validate();
  return c;
}

AugConfig AugConfig::disabled() {
  AugConfig c;
  c.crop_scale_min = c.crop_scale_max = 1.0;
  c.mixup_prob = 0;
  c.mosaic_prob = 0;
  return c;
}

namespace {

// Bilinear sample of the source region [x0, x0 + w) x [y0, y0 + h) (pixels)
// onto an out_w x out_h grid, written at (dst_x, dst_y) in `dst`.
void resample_into(const Image& src, double x0, double y0, double w, double h, Image& dst, int dst_x, int dst_y,
                   int out_w, int out_h) {
  const double sx = w / out_w;
  const double sy = h / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp(y0 + (y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int iy0 = static_cast<int>(fy);
    const int iy1 = std::min(iy0 + 1, src.height - 1);
    const double wy = fy - iy0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp(x0 + (x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int ix0 = static_cast<int>(fx);
      const int ix1 = std::min(ix0 + 1, src.width - 1);
      const double wx = fx - ix0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(c, iy0, ix0) * (1 - wx) + src.at(c, iy0, ix1) * wx;
        const double bot = src.at(c, iy1, ix0) * (1 - wx) + src.at(c, iy1, ix1) * wx;
        dst.at(c, dst_y + y, dst_x + x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
}

bool keep_visible(const Box& original, Box& mapped, double scale_x, double scale_y, double min_visibility) {
  if (box_is_valid(mapped)) return true;
  if (!clip_box(mapped)) return false;
  // Visible fraction measured in the original image's frame.
  const double visible = (mapped.w * scale_x) * (mapped.h * scale_y);
  return visible >= min_visibility * original.area();
}

}  // namespace

DetSample crop_scale(const DetSample& sample, const CropWindow& window, double min_visibility) {
  const Image& src = sample.image;
  DetSample out;
  out.image = Image(src.channels, src.height, src.width);
  resample_into(src, window.x0 * src.width, window.y0 * src.height, window.side * src.width,
                window.side * src.height, out.image, 0, 0, src.width, src.height);
  for (const Box& b : sample.boxes) {
    Box m{b.class_id, (b.cx - window.x0) / window.side, (b.cy - window.y0) / window.side, b.w / window.side,
          b.h / window.side};
    if (keep_visible(b, m, window.side, window.side, min_visibility)) out.boxes.push_back(m);
  }
  return out;
}

DetSample random_crop_scale(const DetSample& sample, const AugConfig& cfg, Rng& rng) {
  CropWindow w;
  w.side = uniform(rng, cfg.crop_scale_min, cfg.crop_scale_max);
  w.x0 = uniform(rng, 0.0, 1.0 - w.side);
  w.y0 = uniform(rng, 0.0, 1.0 - w.side);
  return crop_scale(sample, w, cfg.min_box_visibility);
}

DetSample mixup_with(const DetSample& a, const DetSample& b, double m) {
  if (!a.image.same_shape(b.image)) throw std::invalid_argument("mixup: image shapes differ");
  if (!(m >= 0 && m <= 1)) throw std::invalid_argument("mixup: coefficient must be in [0, 1]");
  // At the endpoints one image is absent, and so are its labels.
  if (m == 1) return a;
  if (m == 0) return b;
  DetSample out;
  out.image = a.image;
  const float fm = static_cast<float>(m);
  const float fr = 1.0f - fm;
  for (std::size_t i = 0; i < out.image.pixels.size(); ++i) {
    out.image.pixels[i] = std::clamp(fm * a.image.pixels[i] + fr * b.image.pixels[i], 0.0f, 1.0f);
  }
  out.boxes = a.boxes;
  out.boxes.insert(out.boxes.end(), b.boxes.begin(), b.boxes.end());
  return out;
}

DetSample mixup(const DetSample& a, const DetSample& b, const AugConfig& cfg, Rng& rng) {
  return mixup_with(a, b, beta_sample(rng, cfg.mixup_beta, cfg.mixup_beta));
}

DetSample mosaic_at(std::span<const DetSample> samples, double cx, double cy, double min_visibility) {
  if (samples.size() < 4) {
    throw std::invalid_argument("mosaic: needs 4 samples, got " + std::to_string(samples.size()));
  }
  const Image& ref = samples[0].image;
  for (std::size_t k = 1; k < 4; ++k) {
    if (!samples[k].image.same_shape(ref)) throw std::invalid_argument("mosaic: image shapes differ");
  }
  const int W = ref.width;
  const int H = ref.height;
  const int split_x = std::clamp(static_cast<int>(std::lround(cx * W)), 1, W - 1);
  const int split_y = std::clamp(static_cast<int>(std::lround(cy * H)), 1, H - 1);
  const int qx[4] = {0, split_x, 0, split_x};
  const int qy[4] = {0, 0, split_y, split_y};
  const int qw[4] = {split_x, W - split_x, split_x, W - split_x};
  const int qh[4] = {split_y, split_y, H - split_y, H - split_y};

  DetSample out;
  out.image = Image(ref.channels, H, W);
  for (int k = 0; k < 4; ++k) {
    const DetSample& s = samples[static_cast<std::size_t>(k)];
    resample_into(s.image, 0, 0, W, H, out.image, qx[k], qy[k], qw[k], qh[k]);
    const double sx = static_cast<double>(qw[k]) / W;
    const double sy = static_cast<double>(qh[k]) / H;
    const double ox = static_cast<double>(qx[k]) / W;
    const double oy = static_cast<double>(qy[k]) / H;
    for (const Box& b : s.boxes) {
      Box m{b.class_id, ox + b.cx * sx, oy + b.cy * sy, b.w * sx, b.h * sy};
      if (keep_visible(b, m, 1.0 / sx, 1.0 / sy, min_visibility)) out.boxes.push_back(m);
    }
  }
  return out;
}

DetSample mosaic(std::span<const DetSample> samples, const AugConfig& cfg, Rng& rng) {
  const double cx = uniform(rng, 0.3, 0.7);
  const double cy = uniform(rng, 0.3, 0.7);
  return mosaic_at(samples, cx, cy, cfg.min_box_visibility);
}

DetSample augment_pipeline(const DetSample& sample, std::span<const DetSample> pool, const AugConfig& cfg, Rng& rng) {
  DetSample current = sample;
  const bool do_mosaic = uniform(rng, 0.0, 1.0) < cfg.mosaic_prob;
  if (do_mosaic) {
    if (pool.empty()) throw std::invalid_argument("augment_pipeline: mosaic needs a non-empty pool");
    std::vector<DetSample> four{current};
    for (int k = 0; k < 3; ++k) four.push_back(pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))]);
    current = mosaic(four, cfg, rng);
  }
  const bool do_mixup = uniform(rng, 0.0, 1.0) < cfg.mixup_prob;
  if (do_mixup) {
    if (pool.empty()) throw std::invalid_argument("augment_pipeline: mixup needs a non-empty pool");
    const auto& partner = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
    current = mixup(current, partner, cfg, rng);
  }
  return random_crop_scale(current, cfg, rng);
}

}  // namespace dacdet::augment
