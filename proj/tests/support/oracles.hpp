#pragma once
// Independent reference implementations used as test oracles. They share no
// code with the library beyond plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "dacdet/common/box.hpp"

namespace dacdet::oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double cosine(const Vec& a, const Vec& b) { return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b))); }

/// Eq. 3 as printed, evaluated term by term:
///   -1/N sum_i log( exp(cos(h_i, l_i)/tau) / sum_{j != i} exp(cos(h_i, l_j)/tau) )
inline double dac_loss(const std::vector<Vec>& zh, const std::vector<Vec>& zl, double tau) {
  const std::size_t n = zh.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double num = std::exp(cosine(zh[i], zl[i]) / tau);
    double den = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) den += std::exp(cosine(zh[i], zl[j]) / tau);
    }
    total += -std::log(num / den);
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------- mAP

struct Det {
  int image = 0;
  int index = 0;  // position within its image's detection list
  int cls = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double conf = 0;
};

struct Gt {
  int image = 0;
  int cls = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

inline double corner_iou(double ax1, double ay1, double ax2, double ay2, double bx1, double by1, double bx2,
                         double by2) {
  const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double ih = std::min(ay2, by2) - std::max(ay1, by1);
  if (iw <= 0 || ih <= 0) return 0;
  const double inter = iw * ih;
  return inter / ((ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter);
}

struct MapResult {
  std::array<double, kNumClasses> ap{};
  std::array<int, kNumClasses> n_gt{};
  double map50 = 0;
};

/// Brute force: repeatedly pick the highest-confidence unprocessed detection
/// (ties: lower image id, then lower per-image index), match it greedily
/// against the unclaimed same-class GTs of its image (highest IoU >= thresh,
/// ties to the lower GT position), record one PR point per detection, and
/// integrate the all-point interpolated envelope.
inline MapResult brute_force_map(const std::vector<Det>& dets, const std::vector<Gt>& gts, double iou_thresh = 0.5) {
  MapResult r;
  int classes_with_gt = 0;
  double ap_sum = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<const Gt*> cg;
    for (const auto& g : gts)
      if (g.cls == c) cg.push_back(&g);
    std::vector<const Det*> cd;
    for (const auto& d : dets)
      if (d.cls == c) cd.push_back(&d);
    const int n_gt = static_cast<int>(cg.size());
    r.n_gt[static_cast<std::size_t>(c)] = n_gt;
    if (n_gt == 0) continue;

    std::vector<bool> processed(cd.size(), false), claimed(cg.size(), false);
    std::vector<double> recall, precision;
    int tp = 0;
    for (std::size_t step = 0; step < cd.size(); ++step) {
      std::size_t pick = cd.size();
      for (std::size_t k = 0; k < cd.size(); ++k) {
        if (processed[k]) continue;
        if (pick == cd.size()) {
          pick = k;
          continue;
        }
        const Det& a = *cd[k];
        const Det& b = *cd[pick];
        const bool better = a.conf > b.conf || (a.conf == b.conf && (a.image < b.image ||
                                                                     (a.image == b.image && a.index < b.index)));
        if (better) pick = k;
      }
      processed[pick] = true;
      const Det& d = *cd[pick];
      double best = -1;
      std::size_t best_g = cg.size();
      for (std::size_t g = 0; g < cg.size(); ++g) {
        if (claimed[g] || cg[g]->image != d.image) continue;
        const double v = corner_iou(d.x1, d.y1, d.x2, d.y2, cg[g]->x1, cg[g]->y1, cg[g]->x2, cg[g]->y2);
        if (v >= iou_thresh && v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best_g != cg.size()) {
        claimed[best_g] = true;
        ++tp;
      }
      recall.push_back(static_cast<double>(tp) / n_gt);
      precision.push_back(static_cast<double>(tp) / static_cast<double>(step + 1));
    }
    double ap = 0;
    double prev_r = 0;
    for (std::size_t k = 0; k < recall.size(); ++k) {
      double env = 0;
      for (std::size_t j = k; j < precision.size(); ++j) env = std::max(env, precision[j]);
      ap += (recall[k] - prev_r) * env;
      prev_r = recall[k];
    }
    r.ap[static_cast<std::size_t>(c)] = ap;
    ap_sum += ap;
    ++classes_with_gt;
  }
  r.map50 = classes_with_gt ? ap_sum / classes_with_gt : 0.0;
  return r;
}

/// Random small evaluation instance: up to 5 images, per class up to 6 GT and
/// up to 8 detections, many of them jittered copies of GTs so matches occur.
/// Half of the instances draw confidences from a coarse grid to force ties.
struct MapInstance {
  std::map<int, std::vector<Box>> gts;
  std::map<int, std::vector<Detection>> dets;
  std::vector<Gt> flat_gts;
  std::vector<Det> flat_dets;
};

inline MapInstance random_map_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  auto randint = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  MapInstance inst;
  const int n_images = randint(1, 5);
  const bool coarse = u(rng) < 0.5;
  for (int img = 0; img < n_images; ++img) {
    inst.gts[img];
    inst.dets[img];
  }
  auto random_box = [&](int cls) {
    const double w = 0.05 + 0.3 * u(rng);
    const double h = 0.05 + 0.3 * u(rng);
    return Box{cls, w / 2 + (1 - w) * u(rng), h / 2 + (1 - h) * u(rng), w, h};
  };
  for (int c = 0; c < kNumClasses; ++c) {
    const int n_gt = randint(0, 6);
    const int n_det = randint(0, 8);
    std::vector<std::pair<int, Box>> placed;
    for (int k = 0; k < n_gt; ++k) {
      const int img = randint(0, n_images - 1);
      const Box b = random_box(c);
      inst.gts[img].push_back(b);
      placed.emplace_back(img, b);
    }
    for (int k = 0; k < n_det; ++k) {
      int img = randint(0, n_images - 1);
      Box b = random_box(c);
      if (!placed.empty() && u(rng) < 0.7) {
        const auto& [gi, gb] = placed[static_cast<std::size_t>(randint(0, static_cast<int>(placed.size()) - 1))];
        img = gi;
        b = gb;
        b.cx += 0.1 * gb.w * (u(rng) - 0.5) * 4;
        b.cy += 0.1 * gb.h * (u(rng) - 0.5) * 4;
        b.w *= 0.7 + 0.6 * u(rng);
        b.h *= 0.7 + 0.6 * u(rng);
        clip_box(b);
      }
      const double conf = coarse ? randint(1, 5) / 5.0 : u(rng);
      inst.dets[img].push_back(Detection{c, b, conf});
    }
  }
  for (const auto& [img, boxes] : inst.gts)
    for (const auto& b : boxes) inst.flat_gts.push_back(Gt{img, b.class_id, b.x1(), b.y1(), b.x2(), b.y2()});
  for (const auto& [img, ds] : inst.dets)
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const auto& d = ds[k];
      inst.flat_dets.push_back(
          Det{img, static_cast<int>(k), d.class_id, d.box.x1(), d.box.y1(), d.box.x2(), d.box.y2(), d.confidence});
    }
  return inst;
}

}  // namespace dacdet::oracle
