#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "realism/tensor.hpp"

namespace realism::nn {

/// Graph node. `backward_fn` reads this node's grad and accumulates into the
/// grads of its parents.
template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<Scalar>& ensure_grad() {
    if (grad.shape != value.shape || grad.size() != value.size()) grad = Tensor<Scalar>::zeros(value.shape);
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
};

namespace detail {
inline thread_local bool grad_enabled = true;
}

/// Disables graph recording within its scope.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_enabled; }

/// Handle to a graph node. Copies share the node.
template <typename Scalar>
class Var {
 public:
  using TensorType = Tensor<Scalar>;

  Var() = default;
  explicit Var(TensorType value, bool requires_grad = false) : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const TensorType& value() const { return node_->value; }
  TensorType& mutable_value() { return node_->value; }
  const TensorType& grad() const { return node_->grad; }
  TensorType& mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->has_grad(); }
  const Shape& shape() const { return node_->value.shape; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Scalar item() const { return node_->value.data[0]; }
  void zero_grad() {
    if (node_->has_grad()) node_->grad.data.setZero();
  }

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node<Scalar>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<Scalar>> node_;
};

/// Builds a result node; records parents and the backward closure only when
/// recording is enabled and some input requires grad.
template <typename Scalar, typename Backward>
Var<Scalar> make_result(Tensor<Scalar> value, std::vector<Var<Scalar>> inputs, Backward&& backward) {
  Var<Scalar> out(std::move(value), false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  for (auto& in : inputs) node.parents.push_back(in.node());
  node.backward_fn = std::forward<Backward>(backward);
  return out;
}

/// Reverse-mode sweep from a scalar (or seeded) output.
template <typename Scalar>
void backward(const Var<Scalar>& root, Scalar seed = Scalar(1)) {
  if (!root.requires_grad()) return;
  std::vector<Node<Scalar>*> order;
  std::unordered_set<Node<Scalar>*> visited;
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad().data.array() += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

/// Gradient accumulator of a parent, or nullptr if it does not need one.
template <typename Scalar>
Tensor<Scalar>* grad_of(Node<Scalar>& node, std::size_t parent) {
  auto& p = *node.parents[parent];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

/// A named trainable leaf.
template <typename Scalar>
struct Parameter {
  std::string name;
  Var<Scalar> var;
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>>;

}  // namespace realism::nn
