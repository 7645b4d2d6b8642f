#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "vqa/layers.hpp"
#include "vqa/tensor.hpp"

namespace vqa {

/// Answer head: fuses attended image features with the question vector, adds
/// the count residual and maps to answer logits.
template <typename T>
struct FusionHead {
  Linear<T> visual_projection;    // G*C -> p
  Linear<T> question_projection;  // 2h -> p
  Linear<T> count_projection;     // M+1 -> p
  BatchNorm<T> count_norm;        // p
  Linear<T> output;               // p -> answers

  FusionHead() = default;
  FusionHead(std::size_t attended_size, std::size_t question_size, std::size_t count_size, std::size_t width,
             std::size_t answers, Rng& rng);

  std::size_t width() const { return output.in_features(); }

  // Inputs may be single vectors or [N x ...] batches.
  Tensor<T> fuse_modalities(const Tensor<T>& attended, const Tensor<T>& q) const;
  // x + BatchNorm(relu(Linear(c))).
  Tensor<T> integrate_count(const Tensor<T>& x, const Tensor<T>& c);
  // Answer logits; see probabilities() for the normalized form.
  Tensor<T> predict(const Tensor<T>& x) const;

  void set_mode(Mode mode) { count_norm.mode = mode; }
  void collect(NamedTensors<T>& out, const std::string& prefix) const;
  void collect_buffers(NamedTensors<T>& out, const std::string& prefix) const;
};

// Softmax over the last axis.
template <typename T>
Tensor<T> probabilities(const Tensor<T>& logits);

// Mean cross-entropy from logits, with optional label smoothing.
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::size_t> targets, double smoothing = 0.0);

}  // namespace vqa
