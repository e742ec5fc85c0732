#include "dacdet/detnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dacdet/ad/errors.hpp"
#include "dacdet/ad/ops.hpp"
#include "dacdet/common/rng.hpp"

namespace dacdet::detnet {

using nlohmann::json;

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
  const auto& b = backbone;
  if (b.in_channels < 1 || b.stem_channels < 1) bad("channel counts must be >= 1");
  if (b.stage_channels.empty()) bad("at least one stage required");
  if (b.stage_channels.size() != b.stage_blocks.size()) bad("stage_channels and stage_blocks differ in length");
  for (std::size_t i = 0; i < b.stage_channels.size(); ++i) {
    if (b.stage_channels[i] < 2 || b.stage_channels[i] % 2 != 0) bad("stage widths must be even and >= 2");
    if (b.stage_blocks[i] < 0) bad("stage block counts must be >= 0");
  }
  if (proj_hidden < 1) bad("proj_hidden must be >= 1");
  if (proj_dim < 2) bad("proj_dim must be >= 2");
  if (num_classes < 1) bad("num_classes must be >= 1");
}

json ModelConfig::to_json() const {
  return json{{"in_channels", backbone.in_channels},
              {"stem_channels", backbone.stem_channels},
              {"stage_channels", backbone.stage_channels},
              {"stage_blocks", backbone.stage_blocks},
              {"proj_hidden", proj_hidden},
              {"proj_dim", proj_dim},
              {"num_classes", num_classes}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.backbone.in_channels = j.value("in_channels", c.backbone.in_channels);
  c.backbone.stem_channels = j.value("stem_channels", c.backbone.stem_channels);
  c.backbone.stage_channels = j.value("stage_channels", c.backbone.stage_channels);
  c.backbone.stage_blocks = j.value("stage_blocks", c.backbone.stage_blocks);
  c.proj_hidden = j.value("proj_hidden", c.proj_hidden);
  c.proj_dim = j.value("proj_dim", c.proj_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.validate();
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.backbone.stem_channels = 4;
  c.backbone.stage_channels = {4, 8, 8};
  c.backbone.stage_blocks = {1, 1, 1};
  c.proj_hidden = 12;
  c.proj_dim = 6;
  return c;
}

template <typename T>
DetectorModel<T>::DetectorModel(const ModelConfig& config, Empty) : config_(config) {
  config_.validate();
  const auto& b = config_.backbone;
  add_param("backbone.stem.weight", {b.stem_channels, b.in_channels, 3, 3});
  add_param("backbone.stem.bias", {b.stem_channels});
  int prev = b.stem_channels;
  for (std::size_t s = 0; s < b.stage_channels.size(); ++s) {
    const int c = b.stage_channels[s];
    const int h = c / 2;
    const std::string stage = "backbone.stage" + std::to_string(s);
    add_param(stage + ".down.weight", {c, prev, 3, 3});
    add_param(stage + ".down.bias", {c});
    for (int k = 0; k < b.stage_blocks[s]; ++k) {
      const std::string blk = stage + ".block" + std::to_string(k);
      add_param(blk + ".split_a.weight", {h, c, 1, 1});
      add_param(blk + ".split_a.bias", {h});
      add_param(blk + ".split_b.weight", {h, c, 1, 1});
      add_param(blk + ".split_b.bias", {h});
      add_param(blk + ".reduce.weight", {h, h, 1, 1});
      add_param(blk + ".reduce.bias", {h});
      add_param(blk + ".spatial.weight", {h, h, 3, 3});
      add_param(blk + ".spatial.bias", {h});
      add_param(blk + ".merge.weight", {c, c, 1, 1});
      add_param(blk + ".merge.bias", {c});
    }
    prev = c;
  }
  add_param("head.weight", {5 + config_.num_classes, prev, 1, 1});
  add_param("head.bias", {5 + config_.num_classes});
  add_param("proj.fc1.weight", {config_.proj_hidden, prev});
  add_param("proj.fc1.bias", {config_.proj_hidden});
  add_param("proj.fc2.weight", {config_.proj_dim, config_.proj_hidden});
  add_param("proj.fc2.bias", {config_.proj_dim});
}

template <typename T>
DetectorModel<T>::DetectorModel(const ModelConfig& config, uint64_t init_seed) : DetectorModel(config, Empty{}) {
  // Kaiming-uniform over fan-in for weights, zero biases.
  Rng rng(init_seed);
  for (auto& p : params_) {
    const auto& dims = p.shape().dims();
    if (dims.size() == 1) continue;
    int64_t fan_in = 1;
    for (std::size_t d = 1; d < dims.size(); ++d) fan_in *= dims[d];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : p.mutable_data()) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
Tensor<T>& DetectorModel<T>::add_param(const std::string& name, std::vector<int64_t> dims) {
  auto t = Tensor<T>::zeros(ad::Shape(std::move(dims)), true);
  t.set_name(name);
  by_name_[name] = params_.size();
  params_.push_back(std::move(t));
  return params_.back();
}

template <typename T>
const Tensor<T>& DetectorModel<T>::parameter(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second];
}

template <typename T>
int64_t DetectorModel<T>::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

template <typename T>
void DetectorModel<T>::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
Tensor<T> DetectorModel<T>::to_input(const Image& image) {
  std::vector<T> data(image.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (static_cast<T>(image.pixels[i]) - T(0.5)) * T(2);
  return Tensor<T>::from(ad::Shape{image.channels, image.height, image.width}, std::move(data));
}

template <typename T>
Tensor<T> DetectorModel<T>::conv(const Tensor<T>& x, const std::string& prefix, int stride) const {
  const auto& w = parameter(prefix + ".weight");
  const int k = static_cast<int>(w.shape()[2]);
  return ad::silu(ad::conv2d(x, w, parameter(prefix + ".bias"), stride, k / 2));
}

template <typename T>
Tensor<T> DetectorModel<T>::csp_block(const Tensor<T>& x, const std::string& prefix) const {
  auto a = conv(x, prefix + ".split_a", 1);
  auto b = conv(x, prefix + ".split_b", 1);
  auto r = conv(conv(b, prefix + ".reduce", 1), prefix + ".spatial", 1);
  auto merged = ad::concat<T>({a, ad::add(b, r)});
  return conv(merged, prefix + ".merge", 1);
}

template <typename T>
Tensor<T> DetectorModel<T>::backbone_forward(const Tensor<T>& x) const {
  const auto& b = config_.backbone;
  if (x.shape().rank() != 3 || x.shape()[0] != b.in_channels || x.shape()[1] % b.stride() != 0 ||
      x.shape()[2] % b.stride() != 0) {
    throw ad::ShapeError("backbone_forward: input " + x.shape().to_string() + " needs " +
                         std::to_string(b.in_channels) + " channels and spatial size divisible by " +
                         std::to_string(b.stride()));
  }
  auto y = conv(x, "backbone.stem", 1);
  for (std::size_t s = 0; s < b.stage_channels.size(); ++s) {
    const std::string stage = "backbone.stage" + std::to_string(s);
    y = conv(y, stage + ".down", 2);
    for (int k = 0; k < b.stage_blocks[s]; ++k) y = csp_block(y, stage + ".block" + std::to_string(k));
  }
  return y;
}

template <typename T>
GridPrediction<T> DetectorModel<T>::detection_head(const Tensor<T>& p5) const {
  GridPrediction<T> g;
  g.raw = ad::conv2d(p5, parameter("head.weight"), parameter("head.bias"), 1, 0);
  g.grid = static_cast<int>(p5.shape()[1]);
  g.num_classes = config_.num_classes;
  return g;
}

template <typename T>
Tensor<T> DetectorModel<T>::projection_head(const Tensor<T>& p5) const {
  auto pooled = ad::global_avg_pool(p5);
  auto hidden = ad::relu(ad::linear(pooled, parameter("proj.fc1.weight"), parameter("proj.fc1.bias")));
  return ad::linear(hidden, parameter("proj.fc2.weight"), parameter("proj.fc2.bias"));
}

template <typename T>
template <typename U>
DetectorModel<U> DetectorModel<T>::cast() const {
  DetectorModel<U> out(config_, typename DetectorModel<U>::Empty{});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto src = params_[i].data();
    auto dst = out.params_[i].mutable_data();
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<U>(src[k]);
  }
  return out;
}

namespace {

template <typename T>
T sigmoid_scalar(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

std::vector<DetectionResult> non_max_suppression(std::vector<DetectionResult> dets, double nms_iou) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const DetectionResult& a, const DetectionResult& b) { return a.confidence > b.confidence; });
  std::vector<DetectionResult> kept;
  for (const auto& d : dets) {
    bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const DetectionResult& k) {
      return k.class_id == d.class_id && box_iou(k.box, d.box) > nms_iou;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

template <typename T>
std::vector<DetectionResult> decode_predictions(const GridPrediction<T>& grid, double conf_thresh, double nms_iou) {
  const int s = grid.grid;
  std::vector<DetectionResult> candidates;
  for (int row = 0; row < s; ++row) {
    for (int col = 0; col < s; ++col) {
      const double obj = sigmoid_scalar<double>(grid.value(GridPrediction<T>::kObj, row, col));
      int best = 0;
      double best_p = -1;
      for (int c = 0; c < grid.num_classes; ++c) {
        const double p = sigmoid_scalar<double>(grid.value(GridPrediction<T>::kCls + c, row, col));
        if (p > best_p) {
          best_p = p;
          best = c;
        }
      }
      const double conf = obj * best_p;
      if (conf < conf_thresh) continue;
      const double cx = (col + sigmoid_scalar<double>(grid.value(GridPrediction<T>::kTx, row, col))) / s;
      const double cy = (row + sigmoid_scalar<double>(grid.value(GridPrediction<T>::kTy, row, col))) / s;
      const double w = std::exp(static_cast<double>(grid.value(GridPrediction<T>::kTw, row, col)));
      const double h = std::exp(static_cast<double>(grid.value(GridPrediction<T>::kTh, row, col)));
      Box box{best, cx, cy, w, h};
      if (!clip_box(box)) continue;
      candidates.push_back(DetectionResult{best, box, conf});
    }
  }
  return non_max_suppression(std::move(candidates), nms_iou);
}

template class DetectorModel<float>;
template class DetectorModel<double>;
template DetectorModel<double> DetectorModel<float>::cast<double>() const;
template DetectorModel<float> DetectorModel<double>::cast<float>() const;
template DetectorModel<float> DetectorModel<float>::cast<float>() const;
template std::vector<DetectionResult> decode_predictions(const GridPrediction<float>&, double, double);
template std::vector<DetectionResult> decode_predictions(const GridPrediction<double>&, double, double);

}  // namespace dacdet::detnet
