#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "dacdet/common/box.hpp"

namespace dacdet::evalmap {

/// Outcome for one detection; gt_index is -1 when the detection is unmatched.
struct Match {
  int det_index = 0;
  int gt_index = -1;
  double confidence = 0;
  bool is_true_positive = false;
};

/// One point of a precision-recall sweep.
struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct APReport {
  std::array<double, kNumClasses> per_class_ap{};
  std::array<int, kNumClasses> n_gt{};
  double map50 = 0;
  double precision = 1;
  double recall = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;

  nlohmann::json to_json() const;
  friend bool operator==(const APReport&, const APReport&) = default;
};

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using DetectionsById = std::map<int, std::vector<Detection>>;
using BoxesById = std::map<int, std::vector<Box>>;

/// Intersection over union in corner form; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

/// Greedy matching within one image. Detections are processed by descending
/// confidence (ties by index); each claims the highest-IoU unmatched GT of its
/// own class with IoU >= iou_thresh (ties by lower GT index). Matches are
/// returned in processing order.
std::vector<Match> match_detections(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                                    double iou_thresh = 0.5);

/// Per-point PR sweep over matches already sorted by descending confidence.
std::vector<PrPoint> pr_curve(const std::vector<Match>& sorted_matches, int n_gt);

/// All-point interpolated AP: sum_k (r_k - r_{k-1}) * max_{j >= k} p_j over
/// matches sorted by descending confidence. 0 when n_gt == 0.
double average_precision(const std::vector<Match>& sorted_matches, int n_gt);

/// Dataset-level matches of one class in global descending-confidence order
/// (ties by image id, then per-image processing order).
std::vector<Match> class_matches(const DetectionsById& dets, const BoxesById& gts, int class_id,
                                 double iou_thresh = 0.5);

/// mAP@0.5 over classes with GT, plus precision/recall/TP/FP/FN over the
/// detections with confidence >= conf_thresh. Throws EvalError when the image
/// id sets differ.
APReport evaluate(const DetectionsById& dets, const BoxesById& gts, double conf_thresh = 0.25,
                  double iou_thresh = 0.5);

/// CSV with header `class,recall,precision`, one row per PR point.
void write_pr_curves_csv(const std::filesystem::path& path, const DetectionsById& dets, const BoxesById& gts,
                         double iou_thresh = 0.5);

/// Detection records: one `class_id cx cy w h conf` line each.
void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections(const std::filesystem::path& path);

}  // namespace dacdet::evalmap
