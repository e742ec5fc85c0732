#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace dacdet {

enum class ParasiteClass : int { Ring = 0, Trophozoite = 1, Schizont = 2, Gametocyte = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{"ring", "trophozoite", "schizont",
                                                                       "gametocyte"};

/// Axis-aligned box in normalized image coordinates, center form.
struct Box {
  int class_id = 0;
  double cx = 0, cy = 0, w = 0, h = 0;

  double x1() const { return cx - w / 2; }
  double y1() const { return cy - h / 2; }
  double x2() const { return cx + w / 2; }
  double y2() const { return cy + h / 2; }
  double area() const { return w * h; }

  static Box from_corners(int class_id, double x1, double y1, double x2, double y2) {
    return Box{class_id, (x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Class id in range, w, h > 0 and the box lies within [0,1]^2.
bool box_is_valid(const Box& b, double tol = 1e-6);

/// A scored, classified box produced by a detector.
struct Detection {
  int class_id = 0;
  Box box;
  double confidence = 0;
};

/// Clips to the unit square; returns false if nothing positive-area remains.
bool clip_box(Box& b);

/// Intersection over union in corner form; 0 for disjoint or degenerate boxes.
double box_iou(const Box& a, const Box& b);

/// Rounds each coordinate to the 6-decimal text form used on disk.
double quantize_coord(double v);
Box quantize_box(const Box& b);

/// `class_id cx cy w h` with 6 decimals.
std::string format_box(const Box& b);

}  // namespace dacdet
