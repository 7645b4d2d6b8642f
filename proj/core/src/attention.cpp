#include "vqa/attention.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <vector>

#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

template <typename T>
Tensor<T> fuse(const Tensor<T>& x, const Tensor<T>& y) {
  if (x.shape() != y.shape()) {
    throw DimensionError("fuse: shapes differ: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  const auto& a = x.node().data;
  const auto& b = y.node().data;
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    out[i] = -(d * d) + std::max(T(0), a[i] + b[i]);
  }
  // df/dx = -2(x - y) + [x + y > 0], df/dy = 2(x - y) + [x + y > 0]
  return record_op<T>(x.shape(), std::move(out), "fuse", {x, y}, [](TensorNode<T>& self) {
    T* gx = input_grad(self, 0);
    T* gy = input_grad(self, 1);
    const auto& a = self.inputs[0]->data;
    const auto& b = self.inputs[1]->data;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const T g = self.grad[i];
      const T d = T(2) * (a[i] - b[i]);
      const T r = a[i] + b[i] > T(0) ? T(1) : T(0);
      if (gx) gx[i] += g * (r - d);
      if (gy) gy[i] += g * (r + d);
    }
  });
}

template <typename T>
AttentionOutput<T> apply_attention(const Tensor<T>& maps, const Tensor<T>& features) {
  const bool batched = maps.rank() == 4;
  if ((maps.rank() != 3 && maps.rank() != 4) || features.rank() != maps.rank()) {
    throw DimensionError("apply_attention: maps " + shape_str(maps.shape()) + " and features " +
                         shape_str(features.shape()) + " must both be [(N x) ? x H x W]");
  }
  const std::size_t off = batched ? 1 : 0;
  const std::size_t n = batched ? maps.dim(0) : 1;
  const std::size_t g = maps.dim(off), c = features.dim(off);
  const std::size_t h = maps.dim(off + 1), w = maps.dim(off + 2);
  if (features.dim(off + 1) != h || features.dim(off + 2) != w || (batched && features.dim(0) != n)) {
    throw DimensionError("apply_attention: spatial dims differ: " + shape_str(maps.shape()) + " vs " +
                         shape_str(features.shape()));
  }
  auto weights = softmax(reshape(maps, {n, g, h * w}), 2);
  auto columns = transpose(reshape(features, {n, c, h * w}), 1, 2);  // [N x HW x C]
  auto pooled = bmm(weights, columns);                               // [N x G x C]
  AttentionOutput<T> out;
  out.maps = maps;
  out.weights = reshape(weights, maps.shape());
  out.attended = batched ? reshape(pooled, {n, g * c}) : reshape(pooled, {g * c});
  return out;
}

template <typename T>
Attention<T>::Attention(std::size_t feature_channels, std::size_t question_size, std::size_t width,
                        std::size_t glimpses, Rng& rng)
    : visual_projection(feature_channels, width, 1, 1, 0, rng),
      question_projection(question_size, width, rng),
      glimpse_head(width, glimpses, 1, 1, 0, rng, false) {}

template <typename T>
typename Attention<T>::Projected Attention<T>::project(const Tensor<T>& features, const Tensor<T>& q) const {
  return {visual_projection.forward(features), question_projection.forward(q)};
}

template <typename T>
Tensor<T> Attention<T>::attention_maps(const Tensor<T>& fused) const {
  return glimpse_head.forward(fused);
}

template <typename T>
AttentionOutput<T> Attention<T>::forward(const Tensor<T>& features, const Tensor<T>& q, Mode mode, Rng& rng) const {
  auto p = project(features, q);
  auto visual = dropout(p.visual, dropout_rate, mode, rng);
  auto question = dropout(p.question, dropout_rate, mode, rng);
  const std::size_t h = features.shape()[features.rank() - 2];
  const std::size_t w = features.shape().back();
  auto tiled = tile_spatial(question, h, w);
  auto maps = attention_maps(fuse(visual, tiled));
  return apply_attention(maps, features);
}

template <typename T>
void Attention<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  visual_projection.collect(out, prefix + ".visual");
  question_projection.collect(out, prefix + ".question");
  glimpse_head.collect(out, prefix + ".glimpse");
}

template <typename T>
void write_attention_grid(std::ostream& out, const Tensor<T>& weights_2d) {
  if (weights_2d.rank() != 2) throw DimensionError("attention grid must be [H x W], got " + shape_str(weights_2d.shape()));
  const std::size_t h = weights_2d.dim(0), w = weights_2d.dim(1);
  char buf[32];
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::snprintf(buf, sizeof buf, "%.6f", static_cast<double>(weights_2d[y * w + x]));
      if (x) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

template Tensor<float> fuse(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> fuse(const Tensor<double>&, const Tensor<double>&);
template AttentionOutput<float> apply_attention(const Tensor<float>&, const Tensor<float>&);
template AttentionOutput<double> apply_attention(const Tensor<double>&, const Tensor<double>&);
template struct Attention<float>;
template struct Attention<double>;
template void write_attention_grid(std::ostream&, const Tensor<float>&);
template void write_attention_grid(std::ostream&, const Tensor<double>&);

}  // namespace vqa
