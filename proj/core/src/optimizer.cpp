#include "vqa/optimizer.hpp"

#include <cmath>

#include "vqa/errors.hpp"

namespace vqa {

template <typename T>
OptimizerState<T>::OptimizerState(std::vector<Tensor<T>> registered, AdamOptions opts)
    : options(opts), params(std::move(registered)) {
  if (!(options.learning_rate > 0 && options.beta1 > 0 && options.beta2 > 0 && options.epsilon > 0)) {
    throw ConfigError("adam: learning rate, betas and epsilon must be positive");
  }
  for (const auto& p : params) {
    first_moment.emplace_back(p.numel(), 0.0);
    second_moment.emplace_back(p.numel(), 0.0);
  }
}

template <typename T>
void adam_step(OptimizerState<T>& state) {
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    if (!state.params[i].has_grad()) {
      throw UsageError("adam_step: parameter " + std::to_string(i) + " " + shape_str(state.params[i].shape()) +
                       " has no gradient");
    }
  }
  ++state.step_count;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  const double inv1 = 1.0 / correction1, inv2 = 1.0 / correction2;
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    auto& p = state.params[i];
    T* data = p.data().data();
    T* grad = p.grad().data();
    double* m = state.first_moment[i].data();
    double* v = state.second_moment[i].data();
    const std::size_t n = p.numel();
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grad[j];
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      const double update = o.learning_rate * (m[j] * inv1) / (std::sqrt(v[j] * inv2) + o.epsilon);
      data[j] = static_cast<T>(data[j] - update);
      grad[j] = T(0);
    }
  }
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template void adam_step(OptimizerState<float>&);
template void adam_step(OptimizerState<double>&);

}  // namespace vqa
