#include "vqa/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "vqa/errors.hpp"

namespace vqa {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
T* TensorNode<T>::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad.data();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<TensorNode<T>>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<TensorNode<T>>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  if (has_lineage()) throw UsageError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = flag;
  return *this;
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data);
}

template <typename T>
Tensor<T> Tensor<T>::from_node(std::shared_ptr<TensorNode<T>> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

namespace {
thread_local bool g_grad_enabled = true;
std::string g_fault_op;
}  // namespace

void set_gradient_fault(std::string_view op) { g_fault_op = std::string(op); }

template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> data, const char* name, std::vector<Tensor<T>> inputs,
                    std::function<void(TensorNode<T>&)> backward) {
  auto node = std::make_shared<TensorNode<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = name;
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->inputs.push_back(in.defined() ? in.node_ptr() : nullptr);
    node->backward = [fn = std::move(backward)](TensorNode<T>& self) {
      if (!g_fault_op.empty() && g_fault_op == self.op) {
        for (auto& g : self.grad) g *= T(2);
        fn(self);
        for (auto& g : self.grad) g /= T(2);
      } else {
        fn(self);
      }
    };
  }
  return Tensor<T>::from_node(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

template <typename T>
void backward(const Tensor<T>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw UsageError("backward: root must be a scalar, got shape " +
                     (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
  }
  if (!root.requires_grad()) throw UsageError("backward: root does not depend on any gradient leaf");

  // Iterative post-order DFS gives a topological order (inputs first).
  using Node = TensorNode<T>;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node_ptr().get(), 0);
  visited.insert(root.node_ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward) n->grad.clear();
  }
  root.node().grad_buffer()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template struct TensorNode<float>;
template struct TensorNode<double>;
template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> record_op(Shape, std::vector<float>, const char*, std::vector<Tensor<float>>,
                                 std::function<void(TensorNode<float>&)>);
template Tensor<double> record_op(Shape, std::vector<double>, const char*, std::vector<Tensor<double>>,
                                  std::function<void(TensorNode<double>&)>);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace vqa
