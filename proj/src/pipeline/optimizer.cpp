#include "dacdet/pipeline/optimizer.hpp"

#include <cmath>
#include <string>

namespace dacdet::pipeline {

using detnet::CheckpointError;
using detnet::NamedArray;

namespace {

void ensure_slots(std::vector<std::vector<float>>& slots, const std::vector<ad::Tensor<float>>& params) {
  if (!slots.empty()) return;
  for (const auto& p : params) slots.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
}

std::vector<std::string> param_names(const std::vector<ad::Tensor<float>>& params) {
  std::vector<std::string> names;
  for (const auto& p : params) names.push_back(p.name());
  return names;
}

// Moments are stored as float32 arrays named "<prefix>.<param name>".
void export_slots(const std::vector<std::vector<float>>& slots, const std::string& prefix,
                  const std::vector<std::string>& names, std::vector<NamedArray>& out) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    NamedArray a{prefix + "." + names[i], {static_cast<int64_t>(slots[i].size())}, {}};
    a.values = slots[i];
    out.push_back(std::move(a));
  }
}

const NamedArray& find_array(const std::vector<NamedArray>& state, const std::string& name) {
  for (const auto& a : state) {
    if (a.name == name) return a;
  }
  throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "optimizer state lacks array " + name);
}

void import_slots(std::vector<std::vector<float>>& slots, const std::string& prefix,
                  const std::vector<NamedArray>& state, const std::vector<ad::Tensor<float>>& params) {
  slots.clear();
  for (const auto& p : params) {
    const auto& a = find_array(state, prefix + "." + p.name());
    if (static_cast<int64_t>(a.values.size()) != p.numel()) {
      throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                            "optimizer array " + a.name + " has " + std::to_string(a.values.size()) +
                                " values, parameter has " + std::to_string(p.numel()));
    }
    slots.push_back(a.values);
  }
}

}  // namespace

void Adam::step(std::vector<ad::Tensor<float>>& params) {
  ensure_slots(m_, params);
  ensure_slots(v_, params);
  if (names_.empty()) names_ = param_names(params);
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].mutable_data();
    auto grad = params[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = grad[k];
      const double mk = b1 * m[k] + (1 - b1) * g;
      const double vk = b2 * v[k] + (1 - b2) * g * g;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + cfg_.eps);
      data[k] = static_cast<float>(data[k] - update);
    }
  }
}

std::vector<NamedArray> Adam::export_state() const {
  std::vector<NamedArray> out;
  out.push_back(NamedArray{"adam.t", {1}, {static_cast<float>(t_)}});
  export_slots(m_, "adam.m", names_, out);
  export_slots(v_, "adam.v", names_, out);
  return out;
}

void Adam::import_state(const std::vector<NamedArray>& state, const std::vector<ad::Tensor<float>>& params) {
  const auto& t = find_array(state, "adam.t");
  if (t.values.size() != 1) throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "adam.t must hold 1 value");
  t_ = static_cast<long long>(t.values[0]);
  if (t_ == 0) {  // exported before the first step: no moments yet
    m_.clear();
    v_.clear();
    return;
  }
  import_slots(m_, "adam.m", state, params);
  import_slots(v_, "adam.v", state, params);
  names_ = param_names(params);
}

void Sgd::step(std::vector<ad::Tensor<float>>& params) {
  ensure_slots(velocity_, params);
  if (names_.empty()) names_ = param_names(params);
  const double lr = cfg_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].mutable_data();
    auto grad = params[i].grad();
    auto& vel = velocity_[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double vk = cfg_.momentum * vel[k] + grad[k];
      vel[k] = static_cast<float>(vk);
      data[k] = static_cast<float>(data[k] - lr * vk);
    }
  }
}

std::vector<NamedArray> Sgd::export_state() const {
  std::vector<NamedArray> out;
  export_slots(velocity_, "sgd.v", names_, out);
  return out;
}

void Sgd::import_state(const std::vector<NamedArray>& state, const std::vector<ad::Tensor<float>>& params) {
  if (state.empty()) {  // exported before the first step
    velocity_.clear();
    return;
  }
  import_slots(velocity_, "sgd.v", state, params);
  names_ = param_names(params);
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg) {
  cfg.validate();
  if (cfg.kind == OptimizerKind::Adam) return std::make_unique<Adam>(cfg);
  return std::make_unique<Sgd>(cfg);
}

}  // namespace dacdet::pipeline
