#include "dacdet/common/box.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace dacdet {

bool box_is_valid(const Box& b, double tol) {
  return b.class_id >= 0 && b.class_id < kNumClasses && b.w > 0 && b.h > 0 && b.x1() >= -tol &&
         b.y1() >= -tol && b.x2() <= 1 + tol && b.y2() <= 1 + tol;
}

bool clip_box(Box& b) {
  double x1 = std::clamp(b.x1(), 0.0, 1.0);
  double y1 = std::clamp(b.y1(), 0.0, 1.0);
  double x2 = std::clamp(b.x2(), 0.0, 1.0);
  double y2 = std::clamp(b.y2(), 0.0, 1.0);
  if (x2 <= x1 || y2 <= y1) return false;
  b = Box::from_corners(b.class_id, x1, y1, x2, y2);
  return true;
}

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double quantize_coord(double v) {
  char buf[64];
  int n = std::snprintf(buf, sizeof buf, "%.6f", v);
  double out = 0;
  auto res = std::from_chars(buf, buf + n, out);
  if (res.ec != std::errc()) throw std::runtime_error("quantize_coord: cannot parse " + std::string(buf, n));
  return out;
}

Box quantize_box(const Box& b) {
  return Box{b.class_id, quantize_coord(b.cx), quantize_coord(b.cy), quantize_coord(b.w), quantize_coord(b.h)};
}

std::string format_box(const Box& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", b.class_id, b.cx, b.cy, b.w, b.h);
  return buf;
}

}  // namespace dacdet
