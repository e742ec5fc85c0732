#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dacdet/ad/tensor.hpp"
#include "dacdet/common/box.hpp"
#include "dacdet/common/image.hpp"

namespace dacdet::detnet {

using ad::Tensor;

/// Scaled-down CSP-style backbone: a stride-1 stem, then one stage per entry
/// of stage_channels, each opening with a stride-2 3x3 convolution followed by
/// stage_blocks split-merge blocks. Three stages give the stride-8 P5 map.
struct BackboneConfig {
  int in_channels = 3;
  int stem_channels = 16;
  std::vector<int> stage_channels{16, 32, 64};
  std::vector<int> stage_blocks{2, 2, 2};

  int stride() const { return 1 << stage_channels.size(); }
  int p5_channels() const { return stage_channels.back(); }
};

struct ModelConfig {
  BackboneConfig backbone;
  int proj_hidden = 128;
  int proj_dim = 64;
  int num_classes = kNumClasses;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  /// Tiny widths used for exhaustive finite-difference checks.
  static ModelConfig tiny();

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) { return a.to_json() == b.to_json(); }
};

/// Raw single-scale head output, stored channel-major as [(5 + classes) x S x S].
/// Channel 0 is the objectness logit, 1..4 are t_x, t_y, t_w, t_h and the
/// remaining channels are per-class logits.
template <typename T>
struct GridPrediction {
  static constexpr int kObj = 0;
  static constexpr int kTx = 1;
  static constexpr int kTy = 2;
  static constexpr int kTw = 3;
  static constexpr int kTh = 4;
  static constexpr int kCls = 5;

  Tensor<T> raw;
  int grid = 0;
  int num_classes = kNumClasses;

  int64_t index(int channel, int row, int col) const {
    return (static_cast<int64_t>(channel) * grid + row) * grid + col;
  }
  T value(int channel, int row, int col) const { return raw.at(index(channel, row, col)); }
};

/// Box normalized and clipped to [0, 1]; confidence in [0, 1].
using DetectionResult = Detection;

/// Backbone f, detection head h and projection head g with one shared set of
/// parameters. Forward calls read the parameters; only an optimizer mutates them.
template <typename T>
class DetectorModel {
 public:
  DetectorModel(const ModelConfig& config, uint64_t init_seed);

  const ModelConfig& config() const { return config_; }

  /// Image in [0,1] -> network input (x - 0.5) * 2, without gradient.
  static Tensor<T> to_input(const Image& image);

  Tensor<T> backbone_forward(const Tensor<T>& x) const;
  GridPrediction<T> detection_head(const Tensor<T>& p5) const;
  /// global_avg_pool -> linear(hidden) -> relu -> linear(dim)
  Tensor<T> projection_head(const Tensor<T>& p5) const;

  std::vector<Tensor<T>>& parameters() { return params_; }
  const std::vector<Tensor<T>>& parameters() const { return params_; }
  const Tensor<T>& parameter(const std::string& name) const;
  int64_t parameter_count() const;
  void zero_grads();

  /// Same architecture, values converted element-wise.
  template <typename U>
  DetectorModel<U> cast() const;
  /// Deep copy; the copy shares no parameter storage with this model.
  DetectorModel clone() const { return cast<T>(); }

 private:
  struct Empty {};
  explicit DetectorModel(const ModelConfig& config, Empty);

  Tensor<T>& add_param(const std::string& name, std::vector<int64_t> dims);
  Tensor<T> conv(const Tensor<T>& x, const std::string& prefix, int stride) const;
  Tensor<T> csp_block(const Tensor<T>& x, const std::string& prefix) const;

  template <typename U>
  friend class DetectorModel;

  ModelConfig config_;
  std::vector<Tensor<T>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

/// Per cell: box ((col + sigmoid(t_x)) / S, (row + sigmoid(t_y)) / S, exp(t_w), exp(t_h)),
/// confidence sigmoid(obj) * max_c sigmoid(cls_c). Keeps confidence >= conf_thresh,
/// then class-wise greedy NMS at nms_iou; sorted by descending confidence.
template <typename T>
std::vector<DetectionResult> decode_predictions(const GridPrediction<T>& grid, double conf_thresh, double nms_iou);

/// Greedy NMS within each class over already-decoded detections.
std::vector<DetectionResult> non_max_suppression(std::vector<DetectionResult> dets, double nms_iou);

}  // namespace dacdet::detnet
