#pragma once

#include <cstddef>
#include <vector>

#include "vqa/tensor.hpp"

namespace vqa {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct OptimizerState {
  AdamOptions options;
  std::vector<Tensor<T>> params;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step_count = 0;

  OptimizerState(std::vector<Tensor<T>> registered, AdamOptions opts = {});
};

/// One bias-corrected Adam update over every registered parameter, then
/// zeroes their gradients. Throws UsageError if a parameter has no gradient.
template <typename T>
void adam_step(OptimizerState<T>& state);

}  // namespace vqa
