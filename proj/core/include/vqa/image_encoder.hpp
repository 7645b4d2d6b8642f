#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "vqa/layers.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kFeatureChannels = 64;
inline constexpr std::size_t kFeatureGrid = 8;
inline constexpr double kFeatureEpsilon = 1e-8;

/// Four 3x3 conv + ReLU blocks (3 -> 16 -> 32 -> 64 -> 64 channels) with 2x2
/// average pooling after the first three, mapping 64x64 RGB to a 64x8x8 grid.
template <typename T>
struct Backbone {
  std::array<Conv2dLayer<T>, 4> blocks;

  Backbone() = default;
  explicit Backbone(Rng& rng);

  void collect(NamedTensors<T>& out, const std::string& prefix) const;
};

// image: [3 x 64 x 64] or [N x 3 x 64 x 64] with values in [0, 1].
template <typename T>
Tensor<T> cnn_forward(const Tensor<T>& image, const Backbone<T>& backbone);

// Divides by (global L2 norm + epsilon); batched input is normalized per sample.
template <typename T>
Tensor<T> l2_normalize_features(const Tensor<T>& features, double epsilon = kFeatureEpsilon);

}  // namespace vqa
