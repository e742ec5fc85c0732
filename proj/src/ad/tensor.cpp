#include "dacdet/ad/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "dacdet/ad/errors.hpp"

namespace dacdet::ad {

namespace {

thread_local bool g_grad_enabled = true;

struct GradFault {
  bool active = false;
  std::string op;
  double factor = 1.0;
};
thread_local GradFault g_fault;

template <typename T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  // Iterative post-order DFS over nodes that take part in differentiation.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  auto n = static_cast<std::size_t>(shape.numel());
  return from(shape, std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::vector<T> data, bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != shape.numel()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape.to_string());
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->grad.assign(data.size(), T(0));
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from(Shape{1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar " + shape().to_string());
  return node_->data[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() requires a scalar loss, got " + loss.shape().to_string());
  }
  Node<T>* root = loss.node();
  if (!root->requires_grad) return;
  auto order = topo_order(root);
  // Interior gradients are scratch space for this pass; leaves accumulate.
  for (Node<T>* n : order) {
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), T(0));
  }
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

template <typename T>
std::vector<Node<T>*> reachable_leaves(const Tensor<T>& root) {
  std::vector<Node<T>*> leaves;
  if (!root.requires_grad()) return leaves;
  for (Node<T>* n : topo_order(root.node())) {
    if (n->is_leaf()) leaves.push_back(n);
  }
  return leaves;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace testing {

ScopedGradFault::ScopedGradFault(std::string op, double factor) {
  g_fault = GradFault{true, std::move(op), factor};
}

ScopedGradFault::~ScopedGradFault() { g_fault = GradFault{}; }

double weight_grad_factor(const std::string& op) {
  return (g_fault.active && g_fault.op == op) ? g_fault.factor : 1.0;
}

}  // namespace testing

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template std::vector<Node<float>*> reachable_leaves(const Tensor<float>&);
template std::vector<Node<double>*> reachable_leaves(const Tensor<double>&);

}  // namespace dacdet::ad
