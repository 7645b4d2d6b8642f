#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include "vqa/layers.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

inline constexpr std::size_t kGlimpses = 2;

/// f(x, y) = -(x - y)^2 + relu(x + y), elementwise. Shapes must match exactly.
template <typename T>
Tensor<T> fuse(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
struct AttentionOutput {
  Tensor<T> maps;      // logits, [G x H x W] or [N x G x H x W]
  Tensor<T> weights;   // spatial softmax of maps, same shape
  Tensor<T> attended;  // [G*C] or [N x G*C], glimpses concatenated
};

// Per glimpse: softmax over the H*W logits, then the weighted sum of the
// feature columns V[:, h, w].
template <typename T>
AttentionOutput<T> apply_attention(const Tensor<T>& maps, const Tensor<T>& features);

template <typename T>
struct Attention {
  Conv2dLayer<T> visual_projection;  // 1x1, C -> m
  Linear<T> question_projection;     // 2h -> m
  Conv2dLayer<T> glimpse_head;       // 1x1, m -> G, no bias
  double dropout_rate = 0.0;

  struct Projected {
    Tensor<T> visual;    // [(N x) m x H x W]
    Tensor<T> question;  // [(N x) m]
  };

  Attention() = default;
  Attention(std::size_t feature_channels, std::size_t question_size, std::size_t width, std::size_t glimpses,
            Rng& rng);

  Projected project(const Tensor<T>& features, const Tensor<T>& q) const;
  Tensor<T> attention_maps(const Tensor<T>& fused) const;

  // Full path: project, (dropout), tile, fuse, glimpse logits, apply.
  AttentionOutput<T> forward(const Tensor<T>& features, const Tensor<T>& q, Mode mode, Rng& rng) const;

  void collect(NamedTensors<T>& out, const std::string& prefix) const;
};

// One grid line per image row, space-separated values with 6 decimals.
template <typename T>
void write_attention_grid(std::ostream& out, const Tensor<T>& weights_2d);

}  // namespace vqa
