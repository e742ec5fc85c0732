#include "dacdet/evalmap/evalmap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace dacdet::evalmap {

using nlohmann::json;

json APReport::to_json() const {
  json j;
  j["map50"] = map50;
  for (int c = 0; c < kNumClasses; ++c) {
    j["ap_" + std::string(kClassNames[static_cast<std::size_t>(c)])] = per_class_ap[static_cast<std::size_t>(c)];
  }
  j["precision"] = precision;
  j["recall"] = recall;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  return j;
}

double iou(const Box& a, const Box& b) { return box_iou(a, b); }

namespace {

std::vector<int> confidence_order(const std::vector<Detection>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[static_cast<std::size_t>(a)].confidence > dets[static_cast<std::size_t>(b)].confidence;
  });
  return order;
}

void check_ids(const DetectionsById& dets, const BoxesById& gts) {
  std::vector<int> only_dets;
  std::vector<int> only_gts;
  for (const auto& [id, _] : dets) {
    if (!gts.contains(id)) only_dets.push_back(id);
  }
  for (const auto& [id, _] : gts) {
    if (!dets.contains(id)) only_gts.push_back(id);
  }
  if (only_dets.empty() && only_gts.empty()) return;
  auto list = [](const std::vector<int>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? "," : "") + std::to_string(ids[i]);
    if (ids.size() > 10) s += ",...";
    return s;
  };
  throw EvalError("evaluate: image id sets differ; only in detections: [" + list(only_dets) +
                  "], only in ground truth: [" + list(only_gts) + "]");
}

}  // namespace

std::vector<Match> match_detections(const std::vector<Detection>& dets, const std::vector<Box>& gts,
                                    double iou_thresh) {
  std::vector<bool> claimed(gts.size(), false);
  std::vector<Match> out;
  out.reserve(dets.size());
  for (int di : confidence_order(dets)) {
    const Detection& d = dets[static_cast<std::size_t>(di)];
    Match m{di, -1, d.confidence, false};
    double best = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g] || gts[g].class_id != d.class_id) continue;
      const double v = iou(d.box, gts[g]);
      if (v >= iou_thresh && v > best) {
        best = v;
        m.gt_index = static_cast<int>(g);
      }
    }
    if (m.gt_index >= 0) {
      claimed[static_cast<std::size_t>(m.gt_index)] = true;
      m.is_true_positive = true;
    }
    out.push_back(m);
  }
  return out;
}

std::vector<PrPoint> pr_curve(const std::vector<Match>& sorted_matches, int n_gt) {
  std::vector<PrPoint> pts;
  pts.reserve(sorted_matches.size());
  int tp = 0;
  int k = 0;
  for (const Match& m : sorted_matches) {
    ++k;
    if (m.is_true_positive) ++tp;
    const double recall = n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0;
    pts.push_back({recall, static_cast<double>(tp) / k});
  }
  return pts;
}

double average_precision(const std::vector<Match>& sorted_matches, int n_gt) {
  if (n_gt <= 0) return 0.0;
  const auto pts = pr_curve(sorted_matches, n_gt);
  std::vector<double> envelope(pts.size());
  double running = 0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * envelope[i];
    prev_recall = pts[i].recall;
  }
  return ap;
}

std::vector<Match> class_matches(const DetectionsById& dets, const BoxesById& gts, int class_id,
                                 double iou_thresh) {
  std::vector<Match> all;
  for (const auto& [id, boxes] : gts) {
    auto it = dets.find(id);
    if (it == dets.end()) continue;
    std::vector<Detection> cls_dets;
    for (const Detection& d : it->second) {
      if (d.class_id == class_id) cls_dets.push_back(d);
    }
    std::vector<Box> cls_gts;
    for (const Box& b : boxes) {
      if (b.class_id == class_id) cls_gts.push_back(b);
    }
    for (const Match& m : match_detections(cls_dets, cls_gts, iou_thresh)) all.push_back(m);
  }
  std::stable_sort(all.begin(), all.end(), [](const Match& a, const Match& b) { return a.confidence > b.confidence; });
  return all;
}

APReport evaluate(const DetectionsById& dets, const BoxesById& gts, double conf_thresh, double iou_thresh) {
  check_ids(dets, gts);
  APReport r;
  int total_gt = 0;
  double ap_sum = 0;
  int classes_present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    int n_gt = 0;
    for (const auto& [_, boxes] : gts) {
      n_gt += static_cast<int>(std::count_if(boxes.begin(), boxes.end(), [c](const Box& b) { return b.class_id == c; }));
    }
    const auto matches = class_matches(dets, gts, c, iou_thresh);
    const double ap = average_precision(matches, n_gt);
    r.per_class_ap[static_cast<std::size_t>(c)] = ap;
    r.n_gt[static_cast<std::size_t>(c)] = n_gt;
    total_gt += n_gt;
    if (n_gt > 0) {
      ap_sum += ap;
      ++classes_present;
    }
    // Greedy matching in descending confidence means the matches of the
    // detections above the threshold do not depend on those below it.
    for (const Match& m : matches) {
      if (m.confidence < conf_thresh) continue;
      (m.is_true_positive ? r.tp : r.fp) += 1;
    }
  }
  r.map50 = classes_present > 0 ? ap_sum / classes_present : 0.0;
  r.fn = total_gt - r.tp;
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 1.0;
  r.recall = total_gt > 0 ? static_cast<double>(r.tp) / total_gt : 0.0;
  return r;
}

void write_pr_curves_csv(const std::filesystem::path& path, const DetectionsById& dets, const BoxesById& gts,
                         double iou_thresh) {
  check_ids(dets, gts);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "class,recall,precision\n";
  char buf[96];
  for (int c = 0; c < kNumClasses; ++c) {
    int n_gt = 0;
    for (const auto& [_, boxes] : gts) {
      n_gt += static_cast<int>(std::count_if(boxes.begin(), boxes.end(), [c](const Box& b) { return b.class_id == c; }));
    }
    for (const PrPoint& p : pr_curve(class_matches(dets, gts, c, iou_thresh), n_gt)) {
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", p.recall, p.precision);
      out << kClassNames[static_cast<std::size_t>(c)] << buf;
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[32];
  for (const Detection& d : dets) {
    std::snprintf(buf, sizeof buf, " %.6f", d.confidence);
    out << format_box(Box{d.class_id, d.box.cx, d.box.cy, d.box.w, d.box.h}) << buf << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Detection> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Detection d;
    std::string extra;
    if (!(ls >> d.class_id >> d.box.cx >> d.box.cy >> d.box.w >> d.box.h >> d.confidence) || (ls >> extra)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected `class_id cx cy w h conf`");
    }
    d.box.class_id = d.class_id;
    if (!box_is_valid(d.box) || !(d.confidence >= 0 && d.confidence <= 1)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": invalid detection record");
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace dacdet::evalmap
