#pragma once

#include <cstddef>
#include <string>

#include "vqa/rng.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

// Leaf parameter drawn uniformly from +-1/sqrt(fan_in).
template <typename T>
Tensor<T> scaled_uniform(Shape shape, std::size_t fan_in, Rng& rng);

template <typename T>
Tensor<T> zero_parameter(Shape shape);

/// y = x W^T + b.
template <typename T>
struct Linear {
  Tensor<T> weight;  // [out x in]
  Tensor<T> bias;    // [out], may be undefined

  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng, bool with_bias = true);

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(NamedTensors<T>& out, const std::string& prefix) const;
};

template <typename T>
struct Conv2dLayer {
  Tensor<T> kernels;  // [C_out x C_in x k x k]
  Tensor<T> bias;     // [C_out], may be undefined
  std::size_t stride = 1;
  std::size_t padding = 0;

  Conv2dLayer() = default;
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
              std::size_t padding, Rng& rng, bool with_bias = true);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(NamedTensors<T>& out, const std::string& prefix) const;
};

/// Gated recurrent unit:
///   z  = sigmoid(W_z e + U_z h + b_z)
///   r  = sigmoid(W_r e + U_r h + b_r)
///   h~ = tanh(W_h e + U_h (r * h) + b_h)
///   h' = (1 - z) * h + z * h~
template <typename T>
struct GRUCell {
  Tensor<T> w_z, w_r, w_h;  // [hidden x input]
  Tensor<T> u_z, u_r, u_h;  // [hidden x hidden]
  Tensor<T> b_z, b_r, b_h;  // [hidden]

  GRUCell() = default;
  GRUCell(std::size_t input_size, std::size_t hidden_size, Rng& rng);

  std::size_t input_size() const { return w_z.dim(1); }
  std::size_t hidden_size() const { return w_z.dim(0); }

  // e: [d] or [N x d]; h_prev: [h] or [N x h].
  Tensor<T> step(const Tensor<T>& e, const Tensor<T>& h_prev) const;

  // Input-side gate pre-activations (W e + b) for many rows at once.
  struct InputProjection {
    Tensor<T> z, r, h;
  };
  InputProjection project_inputs(const Tensor<T>& e) const;
  // Same as step() given rows of a precomputed projection.
  Tensor<T> step_projected(const Tensor<T>& xz, const Tensor<T>& xr, const Tensor<T>& xh,
                           const Tensor<T>& h_prev) const;

  void collect(NamedTensors<T>& out, const std::string& prefix) const;
};

enum class Mode { kTrain, kEval };

/// Per-feature batch normalization over [batch x features].
template <typename T>
struct BatchNorm {
  static constexpr double kEpsilon = 1e-5;

  Tensor<T> gamma;         // [features]
  Tensor<T> beta;          // [features]
  Tensor<T> running_mean;  // [features], not trained
  Tensor<T> running_var;   // [features], not trained
  double momentum = 0.1;
  Mode mode = Mode::kTrain;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t features);

  // Train mode updates the running statistics.
  Tensor<T> forward(const Tensor<T>& x);
  void collect(NamedTensors<T>& out, const std::string& prefix) const;
  void collect_buffers(NamedTensors<T>& out, const std::string& prefix) const;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate); eval is identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng);

}  // namespace vqa
