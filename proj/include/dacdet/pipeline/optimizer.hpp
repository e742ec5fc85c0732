#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dacdet/detnet/checkpoint.hpp"
#include "dacdet/pipeline/config.hpp"

namespace dacdet::pipeline {

/// Updates parameters in place from their accumulated gradients. The state
/// (moments, step count) round-trips through checkpoint extra arrays.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::vector<ad::Tensor<float>>& params) = 0;
  virtual std::vector<detnet::NamedArray> export_state() const = 0;
  /// Throws CheckpointError(ShapeMismatch) when the arrays do not fit `params`.
  virtual void import_state(const std::vector<detnet::NamedArray>& state,
                            const std::vector<ad::Tensor<float>>& params) = 0;
};

/// p <- p - lr * m_hat / (sqrt(v_hat) + eps), bias-corrected moments.
class Adam : public Optimizer {
 public:
  explicit Adam(const OptimizerConfig& cfg) : cfg_(cfg) {}
  void step(std::vector<ad::Tensor<float>>& params) override;
  std::vector<detnet::NamedArray> export_state() const override;
  void import_state(const std::vector<detnet::NamedArray>& state,
                    const std::vector<ad::Tensor<float>>& params) override;
  long long steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
  std::vector<std::string> names_;
};

/// v <- momentum * v + g; p <- p - lr * v.
class Sgd : public Optimizer {
 public:
  explicit Sgd(const OptimizerConfig& cfg) : cfg_(cfg) {}
  void step(std::vector<ad::Tensor<float>>& params) override;
  std::vector<detnet::NamedArray> export_state() const override;
  void import_state(const std::vector<detnet::NamedArray>& state,
                    const std::vector<ad::Tensor<float>>& params) override;

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<float>> velocity_;
  std::vector<std::string> names_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg);

}  // namespace dacdet::pipeline
