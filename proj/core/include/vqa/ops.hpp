#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqa/tensor.hpp"

// Differentiable tensor operations. Every function records lineage when grad
// mode is on and any input requires a gradient.
//
// Binary elementwise ops broadcast by aligning trailing dimensions; a
// dimension of size 1 (or a missing leading dimension) expands. Anything
// else raises DimensionError.
namespace vqa {

// --- linear algebra -------------------------------------------------------

// [m x k] . [k x n] -> [m x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Batched: [B x m x k] . [B x k x n] -> [B x m x n]
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b);

// x . W^T + bias for x of shape [in] or [N x in]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Cross-correlation. input is [C x H x W] or [N x C x H x W]; kernels are
// [C_out x C_in x kh x kw]; bias is [C_out] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

// Non-overlapping window average over the two trailing dimensions.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, std::size_t window);

// --- elementwise ----------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> neg(const Tensor<T>& a);
template <typename T>
Tensor<T> square(const Tensor<T>& a);
template <typename T>
Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);
template <typename T>
Tensor<T> exp(const Tensor<T>& a);
template <typename T>
Tensor<T> log(const Tensor<T>& a);
template <typename T>
Tensor<T> sqrt(const Tensor<T>& a);

enum class Elementwise { kAdd, kSub, kMul, kSquare, kRelu, kSigmoid, kTanh };

// Dispatches by tag; unary ops ignore b.
template <typename T>
Tensor<T> elementwise(Elementwise op, const Tensor<T>& a, const Tensor<T>& b = {});

// --- reductions -----------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis, bool keepdim = false);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis, bool keepdim = false);

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis);
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis);

// --- shape ----------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);
template <typename T>
Tensor<T> transpose(const Tensor<T>& a, std::size_t axis0, std::size_t axis1);
template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end);

// Gathers rows of a [V x d] table -> [ids.size() x d].
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::size_t> ids);

// Replicates a [m] (or [N x m]) vector over an H x W grid -> [m x H x W]
// (or [N x m x H x W]).
template <typename T>
Tensor<T> tile_spatial(const Tensor<T>& q, std::size_t height, std::size_t width);

// Hat encoding: out[..., k] = max(0, 1 - |clamp(x, 0, M) - k|), k = 0..M.
// Input [N] or [1] gives [N x (M+1)] or [M+1].
template <typename T>
Tensor<T> hat_encode(const Tensor<T>& counts, std::size_t max_count);

// Mean cross-entropy of logits [N x K] (or [K]) against integer targets,
// with label smoothing eps spread evenly over the K-1 other classes.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets,
                        T smoothing = T(0));

// Per-row Euclidean norm of [N x D] -> [N x 1]. The gradient of a zero row
// is defined as zero.
template <typename T>
Tensor<T> row_norm(const Tensor<T>& a);

}  // namespace vqa
