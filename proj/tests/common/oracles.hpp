#pragma once

// Brute-force reference implementations shared by the unit and acceptance
// tests. They use plain loops and doubles and none of the library's ops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vqa/counting.hpp"
#include "vqa/rng.hpp"
#include "vqa/tensor.hpp"

namespace vqa::oracle {

// maps [G x H x W], features [C x H x W] -> [G*C]
template <typename T>
std::vector<double> attention_loop(const Tensor<T>& maps, const Tensor<T>& features) {
  const std::size_t g = maps.dim(0), c = features.dim(0), h = features.dim(1), w = features.dim(2);
  std::vector<double> out(g * c, 0.0);
  for (std::size_t k = 0; k < g; ++k) {
    double mx = -HUGE_VAL;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) mx = std::max(mx, static_cast<double>(maps[(k * h + y) * w + x]));
    }
    double z = 0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) z += std::exp(maps[(k * h + y) * w + x] - mx);
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          acc += std::exp(maps[(k * h + y) * w + x] - mx) / z * features[(ch * h + y) * w + x];
        }
      }
      out[k * c + ch] = acc;
    }
  }
  return out;
}

inline double box_iou(const Box& a, const Box& b) {
  const double w = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double h = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = w * h;
  return inter / (a.area() + b.area() - inter);
}

// Greedy IoU de-duplication over the boxes whose score is 1: walk them in
// order, keep a box unless it overlaps a kept one by more than tau.
inline std::size_t greedy_nms_count(const std::vector<Box>& boxes, const std::vector<double>& active, double tau) {
  std::vector<Box> kept;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (active[i] < 0.5) continue;
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Box& k) { return box_iou(k, boxes[i]) > tau; });
    if (!dup) kept.push_back(boxes[i]);
  }
  return kept.size();
}

struct BoxConfig {
  std::vector<Box> boxes;
  std::vector<double> scores;  // each 0 or 1
};

// Clusters of jittered copies of a base box, with clusters kept apart.
// Within a cluster every pair overlaps strongly, so the duplicate relation
// is transitive; the configuration is resampled until no pairwise IoU lies
// within `margin` of tau.
inline BoxConfig random_cluster_config(Rng& rng, double tau, double margin) {
  for (;;) {
    BoxConfig cfg;
    const auto clusters = rng.uniform_int(1, 4);
    std::vector<Box> bases;
    for (std::int64_t k = 0; k < clusters; ++k) {
      // Cells of a 2x2 layout keep clusters from touching.
      const double ox = 0.5 * static_cast<double>(k % 2), oy = 0.5 * static_cast<double>(k / 2);
      const double size = rng.uniform(0.2, 0.35);
      const double x0 = ox + rng.uniform(0.02, 0.48 - size), y0 = oy + rng.uniform(0.02, 0.48 - size);
      const Box base{x0, y0, x0 + size, y0 + size};
      const auto copies = rng.uniform_int(1, 4);
      for (std::int64_t m = 0; m < copies; ++m) {
        const double j = 0.02 * size;
        cfg.boxes.push_back({base.x_min + rng.uniform(-j, j), base.y_min + rng.uniform(-j, j),
                             base.x_max + rng.uniform(-j, j), base.y_max + rng.uniform(-j, j)});
        cfg.scores.push_back(rng.bernoulli(0.7) ? 1.0 : 0.0);
      }
    }
    bool ok = true;
    for (std::size_t i = 0; i < cfg.boxes.size() && ok; ++i) {
      for (std::size_t j = i + 1; j < cfg.boxes.size() && ok; ++j) {
        ok = std::abs(box_iou(cfg.boxes[i], cfg.boxes[j]) - tau) >= margin;
      }
    }
    if (ok) return cfg;
  }
}

}  // namespace vqa::oracle
