#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vqa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  // Empty until a gradient is accumulated or zero_grad() allocates it.
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = nullptr;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(TensorNode&)> backward;

  T* grad_buffer();
};

/// Dense row-major n-dimensional array with optional reverse-mode lineage.
///
/// Tensor is a shared handle: copies alias the same storage and graph node,
/// like a reference-counted array. Use clone() or detach() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T& operator[](std::size_t i) { return node_->data[i]; }
  T operator[](std::size_t i) const { return node_->data[i]; }
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<T> grad() { return node_->grad; }
  std::span<const T> grad() const { return node_->grad; }
  // Allocates (or clears) the gradient buffer to zeros.
  void zero_grad();

  // True for results of recorded operations; false for leaves.
  bool has_lineage() const { return node_ && static_cast<bool>(node_->backward); }

  // New leaf with a copy of the data and no lineage.
  Tensor detach() const;

  TensorNode<T>& node() const { return *node_; }
  const std::shared_ptr<TensorNode<T>>& node_ptr() const { return node_; }
  static Tensor from_node(std::shared_ptr<TensorNode<T>> node);

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

template <typename T>
using NamedTensor = std::pair<std::string, Tensor<T>>;

template <typename T>
using NamedTensors = std::vector<NamedTensor<T>>;

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

bool grad_mode_enabled();

/// Builds an operation result. Lineage (inputs and backward) is attached
/// only when grad mode is on and some defined input requires a gradient;
/// undefined inputs are kept as null slots so indices stay stable.
template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> data, const char* name, std::vector<Tensor<T>> inputs,
                    std::function<void(TensorNode<T>&)> backward);

// Gradient buffer of input i of an op node, or nullptr if it needs none.
template <typename T>
T* input_grad(TensorNode<T>& self, std::size_t i) {
  auto* in = self.inputs[i].get();
  return (in && in->requires_grad) ? in->grad_buffer() : nullptr;
}

// Test hook: while set to an op name (e.g. "linear"), that op's backward
// doubles every gradient it emits. Empty string disables.
void set_gradient_fault(std::string_view op);

/// Back-propagates from a scalar root. Leaf gradients accumulate across
/// calls; gradients of interior nodes are recomputed each call.
template <typename T>
void backward(const Tensor<T>& root);

}  // namespace vqa
