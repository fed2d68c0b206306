// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mvp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // lazily sized to value.size()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major float64 array with reverse-mode autodiff.
///
/// A Tensor is a shared handle: copies alias the same storage. Operations in
/// ops.hpp record a backward closure when grad mode is on and at least one
/// input requires grad; calling backward() on a scalar result walks the
/// recorded graph in reverse topological order and accumulates into leaves.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<double> values();
  std::span<const double> values() const;
  double* data() { return values().data(); }
  const double* data() const { return values().data(); }
  double& operator[](std::size_t i) { return node_->value[i]; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  /// Gradient buffer; zero-filled if nothing has been accumulated yet.
  std::span<double> grad();
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool on);

  /// Backpropagate from this scalar. Seeds d(self)/d(self) = 1.
  void backward() const;

  /// Same values, no history, no grad.
  Tensor detach() const;
  /// Deep copy of values, preserving requires_grad as a fresh leaf.
  Tensor clone() const;

  /// Differentiable reshape (copies storage).
  Tensor reshape(Shape shape) const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  /// Builds an op result. Records `backward` only when grad mode is enabled
  /// and some parent requires grad.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::initializer_list<Tensor> parents,
                            std::function<void(detail::Node&)> backward);
  static Tensor make_result(Shape shape, std::vector<double> values,
                            const std::vector<Tensor>& parents,
                            std::function<void(detail::Node&)> backward);

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Grad-mode switch (thread local). Evaluation paths disable recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {
// Gradient slot of parent `i` of `node`, or nullptr when it does not require grad.
inline double* parent_grad(Node& node, std::size_t i) {
  auto& p = node.parents[i];
  return p->requires_grad ? p->grad_buffer().data() : nullptr;
}
}  // namespace detail

}  // namespace mvp
