#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqa/tensor.hpp"

namespace vqa {

/// Axis-aligned box in normalized [0, 1] image coordinates.
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  friend bool operator==(const Box&, const Box&) = default;
};

// Throws UsageError naming the first box with x_min >= x_max or y_min >= y_max.
void validate_boxes(std::span<const Box> boxes);

double iou(const Box& a, const Box& b);

struct CounterOptions {
  double tau = 0.5;     // IoU at which two boxes count as duplicates
  double kappa = 20.0;  // sharpness of the duplicate test
  std::size_t max_count = 10;
};

/// a_i = sigmoid(mean of the [H x W] logits over cells whose centers lie in
/// box i); a box containing no cell center uses the cell under its center.
/// Returns an undefined tensor when there are no boxes.
template <typename T>
Tensor<T> box_attention_scores(const Tensor<T>& logits, std::span<const Box> boxes);

// Constant IoU matrix [N x N].
template <typename T>
Tensor<T> iou_matrix(std::span<const Box> boxes);

// Differentiable IoU matrix from box coordinates [N x 4] (x0, y0, x1, y1).
template <typename T>
Tensor<T> iou_matrix(const Tensor<T>& boxes);

/// count = sum_i a_i / (1 + sum_{j != i} a_j * sigmoid(kappa * (U_ij - tau))).
/// A cluster of m mutually overlapping confident boxes contributes ~1.
/// An undefined `scores` (no boxes) yields 0. Result shape [1].
template <typename T>
Tensor<T> soft_count(const Tensor<T>& scores, const Tensor<T>& iou, double tau, double kappa);

// c_k = max(0, 1 - |count - k|) for k = 0..M; counts above M clamp to M.
template <typename T>
Tensor<T> count_feature_vector(const Tensor<T>& count, std::size_t max_count);

template <typename T>
struct CountFeature {
  Tensor<T> soft_count;  // [1] or [N]
  Tensor<T> c;           // [M+1] or [N x (M+1)]
};

template <typename T>
CountFeature<T> count_objects(const Tensor<T>& first_map, std::span<const Box> boxes, const CounterOptions& options);

// maps: [N x G x H x W]; glimpse 0 drives the count of each sample.
template <typename T>
CountFeature<T> count_batch(const Tensor<T>& maps, const std::vector<std::vector<Box>>& boxes,
                            const CounterOptions& options);

}  // namespace vqa
