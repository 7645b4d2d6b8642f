#include "vqa/layers.hpp"

#include <cmath>

#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

template <typename T>
Tensor<T> scaled_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Tensor<T> zero_parameter(Shape shape) {
  Tensor<T> t(std::move(shape), T(0));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features, Rng& rng, bool with_bias)
    : weight(scaled_uniform<T>({out_features, in_features}, in_features, rng)) {
  if (with_bias) bias = zero_parameter<T>({out_features});
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  return linear(x, weight, bias);
}

template <typename T>
void Linear<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
Conv2dLayer<T>::Conv2dLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride_, std::size_t padding_, Rng& rng, bool with_bias)
    : kernels(scaled_uniform<T>({out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel, rng)),
      stride(stride_),
      padding(padding_) {
  if (with_bias) bias = zero_parameter<T>({out_channels});
}

template <typename T>
Tensor<T> Conv2dLayer<T>::forward(const Tensor<T>& x) const {
  return conv2d(x, kernels, bias, stride, padding);
}

template <typename T>
void Conv2dLayer<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".kernels", kernels);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
GRUCell<T>::GRUCell(std::size_t input_size, std::size_t hidden_size, Rng& rng)
    : w_z(scaled_uniform<T>({hidden_size, input_size}, input_size, rng)),
      w_r(scaled_uniform<T>({hidden_size, input_size}, input_size, rng)),
      w_h(scaled_uniform<T>({hidden_size, input_size}, input_size, rng)),
      u_z(scaled_uniform<T>({hidden_size, hidden_size}, hidden_size, rng)),
      u_r(scaled_uniform<T>({hidden_size, hidden_size}, hidden_size, rng)),
      u_h(scaled_uniform<T>({hidden_size, hidden_size}, hidden_size, rng)),
      b_z(zero_parameter<T>({hidden_size})),
      b_r(zero_parameter<T>({hidden_size})),
      b_h(zero_parameter<T>({hidden_size})) {}

template <typename T>
typename GRUCell<T>::InputProjection GRUCell<T>::project_inputs(const Tensor<T>& e) const {
  return {linear(e, w_z, b_z), linear(e, w_r, b_r), linear(e, w_h, b_h)};
}

template <typename T>
Tensor<T> GRUCell<T>::step_projected(const Tensor<T>& xz, const Tensor<T>& xr, const Tensor<T>& xh,
                                     const Tensor<T>& h_prev) const {
  if (h_prev.shape().back() != hidden_size() || h_prev.shape() != xz.shape()) {
    throw DimensionError("gru: hidden state " + shape_str(h_prev.shape()) + " does not match gate input " +
                         shape_str(xz.shape()));
  }
  const Tensor<T> none;
  auto z = sigmoid(add(xz, linear(h_prev, u_z, none)));
  auto r = sigmoid(add(xr, linear(h_prev, u_r, none)));
  auto candidate = tanh(add(xh, linear(mul(r, h_prev), u_h, none)));
  auto keep = add_scalar(neg(z), T(1));
  return add(mul(keep, h_prev), mul(z, candidate));
}

template <typename T>
Tensor<T> GRUCell<T>::step(const Tensor<T>& e, const Tensor<T>& h_prev) const {
  auto p = project_inputs(e);
  return step_projected(p.z, p.r, p.h, h_prev);
}

template <typename T>
void GRUCell<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".w_z", w_z);
  out.emplace_back(prefix + ".w_r", w_r);
  out.emplace_back(prefix + ".w_h", w_h);
  out.emplace_back(prefix + ".u_z", u_z);
  out.emplace_back(prefix + ".u_r", u_r);
  out.emplace_back(prefix + ".u_h", u_h);
  out.emplace_back(prefix + ".b_z", b_z);
  out.emplace_back(prefix + ".b_r", b_r);
  out.emplace_back(prefix + ".b_h", b_h);
}

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t features)
    : gamma(Tensor<T>::ones({features})),
      beta(Tensor<T>::zeros({features})),
      running_mean(Tensor<T>::zeros({features})),
      running_var(Tensor<T>::ones({features})) {
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x) {
  const std::size_t features = gamma.numel();
  if (x.rank() != 2 || x.dim(1) != features) {
    throw DimensionError("batchnorm: expected [batch x " + std::to_string(features) + "], got " + shape_str(x.shape()));
  }
  Tensor<T> normalized;
  if (mode == Mode::kTrain) {
    if (x.dim(0) < 2) throw UsageError("batchnorm: train mode needs a batch of at least 2");
    auto mu = mean(x, 0, true);
    auto centered = sub(x, mu);
    auto var = mean(square(centered), 0, true);
    normalized = div(centered, sqrt(add_scalar(var, static_cast<T>(kEpsilon))));
    auto rm = running_mean.data();
    auto rv = running_var.data();
    for (std::size_t j = 0; j < features; ++j) {
      rm[j] = static_cast<T>((1.0 - momentum) * rm[j] + momentum * mu[j]);
      rv[j] = static_cast<T>((1.0 - momentum) * rv[j] + momentum * var[j]);
    }
  } else {
    Tensor<T> inv_std({features});
    for (std::size_t j = 0; j < features; ++j) {
      inv_std[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[j]) + kEpsilon));
    }
    normalized = mul(sub(x, running_mean), inv_std);
  }
  return add(mul(normalized, gamma), beta);
}

template <typename T>
void BatchNorm<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

template <typename T>
void BatchNorm<T>::collect_buffers(NamedTensors<T>& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".running_mean", running_mean);
  out.emplace_back(prefix + ".running_var", running_var);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must be in [0, 1)");
  if (mode == Mode::kEval || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> mask(x.shape());
  for (auto& m : mask.data()) m = rng.bernoulli(rate) ? T(0) : keep_scale;
  return mul(x, mask);
}

#define VQA_INSTANTIATE_LAYERS(T)                                          \
  template Tensor<T> scaled_uniform<T>(Shape, std::size_t, Rng&);          \
  template Tensor<T> zero_parameter<T>(Shape);                             \
  template struct Linear<T>;                                               \
  template struct Conv2dLayer<T>;                                          \
  template struct GRUCell<T>;                                              \
  template struct BatchNorm<T>;                                            \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&);

VQA_INSTANTIATE_LAYERS(float)
VQA_INSTANTIATE_LAYERS(double)

}  // namespace vqa
