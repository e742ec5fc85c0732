#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dacdet/ad/shape.hpp"

namespace dacdet::ad {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents that require grad.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
};

/// Handle to a value in a dynamically recorded computation graph.
///
/// Copies share the underlying node. Every op returns a fresh node whose
/// parents are recorded when at least one input requires grad and grad mode is
/// enabled. Leaf gradients accumulate across backward() calls until
/// zero_grad() is called.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->shape.numel(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad; }

  T item() const;
  T at(int64_t flat_index) const { return node_->data.at(static_cast<std::size_t>(flat_index)); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad();

  const std::string& op() const { return node_->op; }
  const std::string& name() const { return node_->name; }
  void set_name(std::string name) { node_->name = std::move(name); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Back-propagates d(loss)/d(value) into every reachable node that requires
/// grad. Throws ShapeError when loss is not a single element.
template <typename T>
void backward(const Tensor<T>& loss);

/// Distinct leaf nodes reachable from `root` that require grad.
template <typename T>
std::vector<Node<T>*> reachable_leaves(const Tensor<T>& root);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace testing {

/// Scales the weight gradient produced by one op kind ("conv2d" or "linear")
/// on the current thread. Negative-control fixture for gradient checks.
class ScopedGradFault {
 public:
  ScopedGradFault(std::string op, double factor);
  ~ScopedGradFault();
  ScopedGradFault(const ScopedGradFault&) = delete;
  ScopedGradFault& operator=(const ScopedGradFault&) = delete;
};

double weight_grad_factor(const std::string& op);

}  // namespace testing

}  // namespace dacdet::ad
