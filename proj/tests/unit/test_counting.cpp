#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vqa/counting.hpp"
#include "vqa/errors.hpp"

namespace vqa {
namespace {

using testing::D;
using testing::expect_fd_gradients;
using testing::project;
using testing::random_param;
using testing::random_tensor;
using testing::values;

Tensor<D> scores_of(std::vector<D> a) {
  const auto n = a.size();
  return Tensor<D>({n}, std::move(a));
}

double count_of(const std::vector<Box>& boxes, std::vector<D> a, double kappa = 20.0) {
  return soft_count(scores_of(std::move(a)), iou_matrix<D>(boxes), 0.5, kappa).item();
}

TEST(BoxScoresTest, ZeroLogitsGiveHalf) {
  const std::vector<Box> boxes = {{0.1, 0.1, 0.4, 0.4}, {0.5, 0.5, 0.9, 0.7}, {0.0, 0.0, 0.01, 0.01}};
  const auto a = box_attention_scores(Tensor<D>::zeros({8, 8}), std::span<const Box>(boxes));
  EXPECT_EQ(values(a), (std::vector<D>{0.5, 0.5, 0.5}));
}

TEST(BoxScoresTest, SaturatedInsideOneBox) {
  const std::vector<Box> boxes = {{0.0, 0.0, 0.5, 0.5}, {0.5, 0.5, 1.0, 1.0}};
  Tensor<D> logits({4, 4}, -1000.0);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 2; ++c) logits[r * 4 + c] = 1000;
  }
  const auto a = box_attention_scores(logits, std::span<const Box>(boxes));
  EXPECT_NEAR(a[0], 1.0, 1e-12);
  EXPECT_NEAR(a[1], 0.0, 1e-12);
}

TEST(BoxScoresTest, SingleCellBox) {
  Tensor<D> logits({2, 2}, std::vector<D>{0.3, -1.2, 2.0, 0.7});
  const std::vector<Box> boxes = {{0.6, 0.1, 0.9, 0.4}};  // covers the centre of cell (0, 1)
  const auto a = box_attention_scores(logits, std::span<const Box>(boxes));
  EXPECT_NEAR(a[0], 1 / (1 + std::exp(1.2)), 1e-15);
}

TEST(BoxScoresTest, BoxWithoutCellCentreUsesCellUnderItsCentre) {
  Tensor<D> logits({2, 2}, std::vector<D>{0.3, -1.2, 2.0, 0.7});
  const std::vector<Box> boxes = {{0.05, 0.55, 0.15, 0.65}};  // inside cell (1, 0), misses its centre
  const auto a = box_attention_scores(logits, std::span<const Box>(boxes));
  EXPECT_NEAR(a[0], 1 / (1 + std::exp(-2.0)), 1e-15);
}

TEST(BoxScoresTest, MeanOverCoveredCells) {
  Tensor<D> logits({2, 2}, std::vector<D>{1, 3, 5, 7});
  const std::vector<Box> boxes = {{0.0, 0.0, 1.0, 0.5}};  // top row
  const auto a = box_attention_scores(logits, std::span<const Box>(boxes));
  EXPECT_NEAR(a[0], 1 / (1 + std::exp(-2.0)), 1e-15);
}

TEST(BoxScoresTest, NoBoxesGiveZeroCount) {
  const std::vector<Box> none;
  const auto feature = count_objects(Tensor<D>::zeros({8, 8}), std::span<const Box>(none), CounterOptions{});
  EXPECT_EQ(feature.soft_count.item(), 0.0);
  EXPECT_EQ(feature.c[0], 1.0);
}

TEST(BoxScoresTest, InvalidBox) {
  const std::vector<Box> bad = {{0.5, 0.1, 0.4, 0.3}};
  EXPECT_THROW(box_attention_scores(Tensor<D>::zeros({8, 8}), std::span<const Box>(bad)), UsageError);
}

TEST(IouTest, HandCases) {
  const Box a{0.0, 0.0, 0.5, 0.5};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, Box{0.6, 0.6, 0.9, 0.9}), 0.0);
  // (0,0,2,2) vs (1,1,3,3) on a 3-unit canvas: intersection 1, union 7.
  EXPECT_NEAR(iou(Box{0, 0, 2.0 / 3, 2.0 / 3}, Box{1.0 / 3, 1.0 / 3, 1, 1}), 1.0 / 7, 1e-15);
}

TEST(IouTest, MatrixSymmetricWithUnitDiagonal) {
  Rng rng(1);
  std::vector<Box> boxes;
  for (int i = 0; i < 6; ++i) {
    const double x = rng.uniform(0, 0.6), y = rng.uniform(0, 0.6);
    boxes.push_back({x, y, x + rng.uniform(0.1, 0.4), y + rng.uniform(0.1, 0.4)});
  }
  const auto u = iou_matrix<D>(boxes);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(u[i * 6 + i], 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(u[i * 6 + j], u[j * 6 + i]);
      EXPECT_NEAR(u[i * 6 + j], oracle::box_iou(boxes[i], boxes[j]), 1e-15);
    }
  }
}

TEST(SoftCountTest, HandCases) {
  const Box a{0.1, 0.1, 0.3, 0.3}, b{0.6, 0.6, 0.8, 0.8};
  EXPECT_NEAR(count_of({a}, {1}), 1.0, 1e-15);
  EXPECT_NEAR(count_of({a, b}, {1, 1}), 2.0, 1e-4);
  EXPECT_NEAR(count_of({a, a}, {1, 1}), 1.0, 1e-3);
}

TEST(SoftCountTest, HandFormula) {
  const std::vector<Box> boxes = {{0.1, 0.1, 0.5, 0.5}, {0.2, 0.1, 0.6, 0.5}, {0.7, 0.7, 0.9, 0.9}};
  const std::vector<D> a = {0.9, 0.4, 0.7};
  const double u01 = oracle::box_iou(boxes[0], boxes[1]);
  const double s01 = 1 / (1 + std::exp(-20 * (u01 - 0.5)));
  const double s_far = 1 / (1 + std::exp(-20 * (0.0 - 0.5)));
  const double expected = a[0] / (1 + a[1] * s01 + a[2] * s_far) + a[1] / (1 + a[0] * s01 + a[2] * s_far) +
                          a[2] / (1 + a[0] * s_far + a[1] * s_far);
  EXPECT_NEAR(count_of(boxes, a), expected, 1e-12);
}

TEST(SoftCountTest, PermutationInvariant) {
  Rng rng(2);
  const auto cfg = oracle::random_cluster_config(rng, 0.5, 0.05);
  std::vector<D> a;
  for (std::size_t i = 0; i < cfg.boxes.size(); ++i) a.push_back(rng.uniform());
  const double base = count_of(cfg.boxes, a);
  std::vector<std::size_t> order(cfg.boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Box> boxes2;
  std::vector<D> a2;
  for (auto i : order) {
    boxes2.push_back(cfg.boxes[i]);
    a2.push_back(a[i]);
  }
  EXPECT_NEAR(count_of(boxes2, a2), base, 1e-12);
}

TEST(SoftCountTest, DisjointBoxAddsOne) {
  std::vector<Box> boxes = {{0.0, 0.0, 0.2, 0.2}, {0.3, 0.0, 0.5, 0.2}};
  const double before = count_of(boxes, {1, 1});
  boxes.push_back({0.7, 0.7, 0.9, 0.9});
  EXPECT_NEAR(count_of(boxes, {1, 1, 1}) - before, 1.0, 1e-3);
}

TEST(SoftCountTest, IdenticalClusterCountsOnce) {
  const Box b{0.2, 0.2, 0.6, 0.6};
  for (std::size_t m = 2; m <= 6; ++m) {
    EXPECT_NEAR(count_of(std::vector<Box>(m, b), std::vector<D>(m, 1.0)), 1.0, 2e-2) << m << " copies";
  }
}

TEST(SoftCountTest, MatchesGreedyNmsWhenSharp) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cfg = oracle::random_cluster_config(rng, 0.5, 0.05);
    const double expected = static_cast<double>(oracle::greedy_nms_count(cfg.boxes, cfg.scores, 0.5));
    EXPECT_LE(std::abs(count_of(cfg.boxes, cfg.scores, 200.0) - expected), 0.1) << "trial " << trial;
  }
}

TEST(SoftCountTest, GradientInScoresAndCoordinates) {
  Rng rng(4);
  auto scores = random_param({3}, rng, 0.1, 0.9);
  Tensor<D> coords({3, 4}, std::vector<D>{0.1, 0.1, 0.5, 0.5, 0.15, 0.12, 0.55, 0.53, 0.6, 0.6, 0.9, 0.95});
  coords.set_requires_grad(true);
  expect_fd_gradients([&] { return soft_count(scores, iou_matrix(coords), 0.5, 20.0); }, {scores, coords}, 1e-6);
}

TEST(CountFeatureTest, HatEncoding) {
  auto c = [](double n) { return values(count_feature_vector(Tensor<D>::scalar(n), 10)); };
  std::vector<D> two(11, 0.0), half(11, 0.0), top(11, 0.0);
  two[2] = 1;
  half[2] = half[3] = 0.5;
  top[10] = 1;
  EXPECT_EQ(c(2.0), two);
  EXPECT_EQ(c(2.5), half);
  EXPECT_EQ(c(15.0), top);
}

TEST(CountFeatureTest, PartitionOfUnity) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto v = values(count_feature_vector(Tensor<D>::scalar(rng.uniform(0, 10)), 10));
    double s = 0;
    for (auto x : v) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(CountFeatureTest, GradientIsUnitOrZero) {
  auto n = Tensor<D>::scalar(2.3);
  n.set_requires_grad(true);
  const auto c = count_feature_vector(n, 10);
  for (std::size_t k = 0; k < 11; ++k) {
    n.zero_grad();
    auto pick = Tensor<D>::zeros({11});
    pick[k] = 1;
    backward(sum(mul(count_feature_vector(n, 10), pick)));
    const double expected = k == 2 ? -1.0 : (k == 3 ? 1.0 : 0.0);
    EXPECT_EQ(n.grad()[0], expected) << "k=" << k;
  }
  (void)c;
}

TEST(CountBatchTest, UsesFirstGlimpse) {
  Rng rng(6);
  auto maps = random_tensor({2, 2, 8, 8}, rng, -3, 3);
  const std::vector<std::vector<Box>> boxes = {{{0.1, 0.1, 0.3, 0.3}, {0.6, 0.6, 0.9, 0.8}}, {}};
  const auto batch = count_batch(maps, boxes, CounterOptions{});
  ASSERT_EQ(batch.soft_count.shape(), (Shape{2}));
  ASSERT_EQ(batch.c.shape(), (Shape{2, 11}));
  const auto single = count_objects(reshape(slice(slice(maps, 0, 0, 1), 1, 0, 1), {8, 8}),
                                    std::span<const Box>(boxes[0]), CounterOptions{});
  EXPECT_NEAR(batch.soft_count[0], single.soft_count.item(), 1e-15);
  EXPECT_EQ(batch.soft_count[1], 0.0);
}

TEST(CountBatchTest, GradientThroughLogits) {
  Rng rng(7);
  auto maps = random_param({2, 2, 4, 4}, rng, -2, 2);
  const std::vector<std::vector<Box>> boxes = {{{0.0, 0.0, 0.5, 0.5}, {0.1, 0.05, 0.55, 0.5}, {0.6, 0.5, 1.0, 0.9}},
                                               {{0.2, 0.2, 0.7, 0.6}}};
  expect_fd_gradients([&] { return project(count_batch(maps, boxes, CounterOptions{}).c, 8); }, {maps}, 1e-4);
}

}  // namespace
}  // namespace vqa
