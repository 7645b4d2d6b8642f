#include "vqa/counting.hpp"

#include <algorithm>
#include <cmath>

#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

void validate_boxes(std::span<const Box> boxes) {
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!boxes[i].valid()) throw UsageError("box " + std::to_string(i) + " has non-positive extent");
  }
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

template <typename T>
Tensor<T> box_attention_scores(const Tensor<T>& logits, std::span<const Box> boxes) {
  if (logits.rank() != 2) throw DimensionError("box_attention_scores: expected [H x W], got " + shape_str(logits.shape()));
  validate_boxes(boxes);
  if (boxes.empty()) return {};
  const std::size_t h = logits.dim(0), w = logits.dim(1);
  Tensor<T> pool({boxes.size(), h * w}, T(0));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    std::vector<std::size_t> cells;
    for (std::size_t r = 0; r < h; ++r) {
      const double cy = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
      if (cy < b.y_min || cy > b.y_max) continue;
      for (std::size_t c = 0; c < w; ++c) {
        const double cx = (static_cast<double>(c) + 0.5) / static_cast<double>(w);
        if (cx >= b.x_min && cx <= b.x_max) cells.push_back(r * w + c);
      }
    }
    if (cells.empty()) {
      auto cell_of = [](double v, std::size_t n) {
        return std::min(n - 1, static_cast<std::size_t>(std::max(0.0, v) * static_cast<double>(n)));
      };
      cells.push_back(cell_of(0.5 * (b.y_min + b.y_max), h) * w + cell_of(0.5 * (b.x_min + b.x_max), w));
    }
    for (auto cell : cells) pool[i * h * w + cell] = T(1) / static_cast<T>(cells.size());
  }
  auto mean_logit = matmul(pool, reshape(logits, {h * w, 1}));
  return sigmoid(reshape(mean_logit, {boxes.size()}));
}

template <typename T>
Tensor<T> iou_matrix(std::span<const Box> boxes) {
  validate_boxes(boxes);
  if (boxes.empty()) throw UsageError("iou_matrix: no boxes");
  Tensor<T> coords({boxes.size(), 4});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    coords[4 * i + 0] = static_cast<T>(boxes[i].x_min);
    coords[4 * i + 1] = static_cast<T>(boxes[i].y_min);
    coords[4 * i + 2] = static_cast<T>(boxes[i].x_max);
    coords[4 * i + 3] = static_cast<T>(boxes[i].y_max);
  }
  return iou_matrix(coords);
}

template <typename T>
Tensor<T> iou_matrix(const Tensor<T>& boxes) {
  if (boxes.rank() != 2 || boxes.dim(1) != 4) {
    throw DimensionError("iou_matrix: expected [N x 4] boxes, got " + shape_str(boxes.shape()));
  }
  const std::size_t n = boxes.dim(0);
  const auto& b = boxes.node().data;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(b[4 * i] < b[4 * i + 2] && b[4 * i + 1] < b[4 * i + 3])) {
      throw UsageError("box " + std::to_string(i) + " has non-positive extent");
    }
  }
  std::vector<T> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        out[i * n + j] = T(1);
        continue;
      }
      const T* p = &b[4 * i];
      const T* q = &b[4 * j];
      const T ix = std::max(T(0), std::min(p[2], q[2]) - std::max(p[0], q[0]));
      const T iy = std::max(T(0), std::min(p[3], q[3]) - std::max(p[1], q[1]));
      const T inter = ix * iy;
      out[i * n + j] = inter / ((p[2] - p[0]) * (p[3] - p[1]) + (q[2] - q[0]) * (q[3] - q[1]) - inter);
    }
  }
  return record_op<T>({n, n}, std::move(out), "iou_matrix", {boxes}, [n](TensorNode<T>& self) {
    T* gb = input_grad(self, 0);
    if (!gb) return;
    const auto& b = self.inputs[0]->data;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const T g = self.grad[i * n + j];
        if (i == j || g == T(0)) continue;
        const T* p = &b[4 * i];
        const T* q = &b[4 * j];
        const T x_lo = std::max(p[0], q[0]), x_hi = std::min(p[2], q[2]);
        const T y_lo = std::max(p[1], q[1]), y_hi = std::min(p[3], q[3]);
        const T ix = std::max(T(0), x_hi - x_lo), iy = std::max(T(0), y_hi - y_lo);
        const T inter = ix * iy;
        const T area_p = (p[2] - p[0]) * (p[3] - p[1]);
        const T area_q = (q[2] - q[0]) * (q[3] - q[1]);
        const T uni = area_p + area_q - inter;
        // U = I / (A_p + A_q - I)
        const T d_inter = (area_p + area_q) / (uni * uni);
        const T d_area = -inter / (uni * uni);
        T* gp = gb + 4 * i;
        T* gq = gb + 4 * j;
        // Area terms.
        gp[0] -= g * d_area * (p[3] - p[1]);
        gp[2] += g * d_area * (p[3] - p[1]);
        gp[1] -= g * d_area * (p[2] - p[0]);
        gp[3] += g * d_area * (p[2] - p[0]);
        gq[0] -= g * d_area * (q[3] - q[1]);
        gq[2] += g * d_area * (q[3] - q[1]);
        gq[1] -= g * d_area * (q[2] - q[0]);
        gq[3] += g * d_area * (q[2] - q[0]);
        // Intersection terms; the max/min picks which box owns each edge.
        if (ix > T(0) && iy > T(0)) {
          const T gx = g * d_inter * iy;  // d inter / d ix
          const T gy = g * d_inter * ix;
          (p[2] <= q[2] ? gp[2] : gq[2]) += gx;
          (p[0] >= q[0] ? gp[0] : gq[0]) -= gx;
          (p[3] <= q[3] ? gp[3] : gq[3]) += gy;
          (p[1] >= q[1] ? gp[1] : gq[1]) -= gy;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> soft_count(const Tensor<T>& scores, const Tensor<T>& iou, double tau, double kappa) {
  if (!scores.defined()) return Tensor<T>::scalar(T(0));
  const std::size_t n = scores.numel();
  if (scores.rank() != 1 || iou.shape() != Shape{n, n}) {
    throw DimensionError("soft_count: scores " + shape_str(scores.shape()) + " and IoU " + shape_str(iou.shape()) +
                         " disagree");
  }
  Tensor<T> off_diagonal({n, n}, T(1));
  for (std::size_t i = 0; i < n; ++i) off_diagonal[i * n + i] = T(0);
  auto duplicate = mul(sigmoid(scale(add_scalar(iou, static_cast<T>(-tau)), static_cast<T>(kappa))), off_diagonal);
  auto overlap_mass = reshape(matmul(duplicate, reshape(scores, {n, 1})), {n});
  return sum(div(scores, add_scalar(overlap_mass, T(1))));
}

template <typename T>
Tensor<T> count_feature_vector(const Tensor<T>& count, std::size_t max_count) {
  if (count.numel() != 1) throw DimensionError("count_feature_vector: expected a scalar count");
  return reshape(hat_encode(reshape(count, {1}), max_count), {max_count + 1});
}

template <typename T>
CountFeature<T> count_objects(const Tensor<T>& first_map, std::span<const Box> boxes, const CounterOptions& options) {
  CountFeature<T> out;
  if (boxes.empty()) {
    out.soft_count = Tensor<T>::scalar(T(0));
  } else {
    out.soft_count = soft_count(box_attention_scores(first_map, boxes), iou_matrix<T>(boxes), options.tau,
                                options.kappa);
  }
  out.c = count_feature_vector(out.soft_count, options.max_count);
  return out;
}

template <typename T>
CountFeature<T> count_batch(const Tensor<T>& maps, const std::vector<std::vector<Box>>& boxes,
                            const CounterOptions& options) {
  if (maps.rank() != 4 || maps.dim(0) != boxes.size()) {
    throw DimensionError("count_batch: maps " + shape_str(maps.shape()) + " vs " + std::to_string(boxes.size()) +
                         " box sets");
  }
  const std::size_t n = maps.dim(0), h = maps.dim(2), w = maps.dim(3);
  auto first = slice(maps, 1, 0, 1);  // [N x 1 x H x W]
  std::vector<Tensor<T>> counts;
  counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (boxes[i].empty()) {
      counts.push_back(Tensor<T>::scalar(T(0)));
      continue;
    }
    auto map_i = reshape(slice(first, 0, i, i + 1), {h, w});
    counts.push_back(soft_count(box_attention_scores(map_i, boxes[i]), iou_matrix<T>(boxes[i]), options.tau,
                                options.kappa));
  }
  CountFeature<T> out;
  out.soft_count = concat(std::span<const Tensor<T>>(counts), 0);
  out.c = hat_encode(out.soft_count, options.max_count);
  return out;
}

#define VQA_INSTANTIATE_COUNTING(T)                                                               \
  template Tensor<T> box_attention_scores(const Tensor<T>&, std::span<const Box>);                \
  template Tensor<T> iou_matrix<T>(std::span<const Box>);                                         \
  template Tensor<T> iou_matrix(const Tensor<T>&);                                                \
  template Tensor<T> soft_count(const Tensor<T>&, const Tensor<T>&, double, double);              \
  template Tensor<T> count_feature_vector(const Tensor<T>&, std::size_t);                         \
  template CountFeature<T> count_objects(const Tensor<T>&, std::span<const Box>, const CounterOptions&); \
  template CountFeature<T> count_batch(const Tensor<T>&, const std::vector<std::vector<Box>>&,   \
                                       const CounterOptions&);

VQA_INSTANTIATE_COUNTING(float)
VQA_INSTANTIATE_COUNTING(double)

}  // namespace vqa
