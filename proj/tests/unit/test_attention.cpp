#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vqa/attention.hpp"
#include "vqa/errors.hpp"

namespace vqa {
namespace {

using testing::D;
using testing::expect_fd_gradients;
using testing::project;
using testing::random_param;
using testing::random_tensor;
using testing::values;

TEST(FuseTest, SpotValues) {
  auto f = [](double x, double y) {
    return fuse(Tensor<D>::scalar(x), Tensor<D>::scalar(y)).item();
  };
  EXPECT_EQ(f(1, 1), 2.0);
  EXPECT_EQ(f(2, -2), -16.0);
  EXPECT_EQ(f(3, 1), 0.0);
  EXPECT_EQ(f(0, 0), 0.0);
}

TEST(FuseTest, SymmetricAndDiagonalIdentity) {
  Rng rng(1);
  auto x = random_tensor({1000}, rng, -10, 10);
  auto y = random_tensor({1000}, rng, -10, 10);
  EXPECT_EQ(values(fuse(x, y)), values(fuse(y, x)));
  EXPECT_EQ(values(fuse(x, x)), values(relu(scale(x, 2.0))));
}

TEST(FuseTest, ShapeMismatch) {
  EXPECT_THROW(fuse(Tensor<D>({2}), Tensor<D>({3})), DimensionError);
}

TEST(FuseTest, GradientMatchesComposite) {
  Rng rng(2);
  auto x = random_param({3, 4}, rng);
  auto y = random_param({3, 4}, rng);
  expect_fd_gradients([&] { return project(fuse(x, y), 1); }, {x, y}, 1e-6);
}

TEST(TileTest, ReplicatesOverGrid) {
  const auto t = tile_spatial(Tensor<D>({2}, std::vector<D>{1, 2}), 2, 2);
  EXPECT_EQ(t.shape(), (Shape{2, 2, 2}));
  EXPECT_EQ(values(t), (std::vector<D>{1, 1, 1, 1, 2, 2, 2, 2}));
}

TEST(TileTest, OneByOneIsReshape) {
  Tensor<D> q({3}, std::vector<D>{4, 5, 6});
  const auto t = tile_spatial(q, 1, 1);
  EXPECT_EQ(t.shape(), (Shape{3, 1, 1}));
  EXPECT_EQ(values(t), values(q));
}

TEST(TileTest, BackwardSumsPositions) {
  Tensor<D> q({3}, std::vector<D>{1, 2, 3});
  q.set_requires_grad(true);
  backward(sum(tile_spatial(q, 3, 4)));
  for (auto g : q.grad()) EXPECT_EQ(g, 12.0);
}

Attention<D> make_attention(std::size_t c, std::size_t qsize, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  Attention<D> att(c, qsize, m, 2, rng);
  for (auto& b : att.visual_projection.bias.data()) b = rng.uniform(-0.2, 0.2);
  for (auto& b : att.question_projection.bias.data()) b = rng.uniform(-0.2, 0.2);
  return att;
}

TEST(ProjectTest, IdentityLikeConvKeepsFeatures) {
  auto att = make_attention(4, 3, 4, 1);
  auto& k = att.visual_projection.kernels;
  std::fill(k.data().begin(), k.data().end(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) k[i * 4 + i] = 1;
  std::fill(att.visual_projection.bias.data().begin(), att.visual_projection.bias.data().end(), 0.0);
  Rng rng(2);
  auto v = random_tensor({4, 2, 3}, rng);
  EXPECT_EQ(values(att.project(v, random_tensor({3}, rng)).visual), values(v));
}

TEST(ProjectTest, ZeroWeightsGiveZeroProjections) {
  auto att = make_attention(4, 3, 5, 1);
  NamedTensors<D> params;
  att.collect(params, "a");
  for (auto& [n, t] : params) std::fill(t.data().begin(), t.data().end(), 0.0);
  Rng rng(3);
  const auto p = att.project(random_tensor({4, 2, 2}, rng), random_tensor({3}, rng));
  EXPECT_EQ(p.visual.shape(), (Shape{5, 2, 2}));
  EXPECT_EQ(p.question.shape(), (Shape{5}));
  for (auto v : p.visual.data()) EXPECT_EQ(v, 0.0);
  for (auto v : p.question.data()) EXPECT_EQ(v, 0.0);
}

TEST(ProjectTest, DimensionMismatch) {
  auto att = make_attention(4, 3, 5, 1);
  EXPECT_THROW(att.project(Tensor<D>({5, 2, 2}), Tensor<D>({3})), DimensionError);
  EXPECT_THROW(att.project(Tensor<D>({4, 2, 2}), Tensor<D>({4})), DimensionError);
}

TEST(ProjectTest, GradientCheck) {
  auto att = make_attention(3, 4, 5, 4);
  Rng rng(5);
  auto v = random_param({3, 2, 2}, rng);
  auto q = random_param({4}, rng);
  std::vector<Tensor<D>> ts = {att.visual_projection.kernels, att.visual_projection.bias,
                               att.question_projection.weight, att.question_projection.bias, v, q};
  expect_fd_gradients(
      [&] {
        const auto p = att.project(v, q);
        return add(project(p.visual, 2), project(p.question, 3));
      },
      ts, 1e-6);
}

TEST(AttentionMapsTest, ZeroHeadGivesUniformWeights) {
  auto att = make_attention(4, 3, 6, 1);
  std::fill(att.glimpse_head.kernels.data().begin(), att.glimpse_head.kernels.data().end(), 0.0);
  Rng rng(6);
  Rng unused(0);
  const auto out = att.forward(random_tensor({4, 8, 8}, rng), random_tensor({3}, rng), Mode::kEval, unused);
  EXPECT_EQ(out.maps.shape(), (Shape{2, 8, 8}));
  for (auto v : out.maps.data()) EXPECT_EQ(v, 0.0);
  for (auto w : out.weights.data()) EXPECT_NEAR(w, 1.0 / 64, 1e-15);
  EXPECT_FALSE(att.glimpse_head.bias.defined());
}

TEST(AttentionMapsTest, FullPathGradientCheck) {
  auto att = make_attention(3, 4, 5, 7);
  Rng rng(8);
  auto v = random_param({2, 3, 3, 3}, rng);
  auto q = random_param({2, 4}, rng);
  NamedTensors<D> params;
  att.collect(params, "a");
  std::vector<Tensor<D>> ts;
  for (auto& [n, t] : params) ts.push_back(t);
  ts.push_back(v);
  ts.push_back(q);
  Rng unused(0);
  expect_fd_gradients([&] { return project(att.forward(v, q, Mode::kEval, unused).attended, 4); }, ts, 1e-4);
}

TEST(ApplyAttentionTest, UniformLogitsGiveSpatialMean) {
  Rng rng(9);
  auto v = random_tensor({3, 4, 4}, rng);
  const auto out = apply_attention(Tensor<D>::zeros({2, 4, 4}), v);
  ASSERT_EQ(out.attended.numel(), 6u);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double mean = 0;
    for (std::size_t p = 0; p < 16; ++p) mean += v[ch * 16 + p] / 16;
    EXPECT_NEAR(out.attended[ch], mean, 1e-15);
    EXPECT_NEAR(out.attended[3 + ch], mean, 1e-15);
  }
}

TEST(ApplyAttentionTest, SaturatedLogitSelectsColumn) {
  Rng rng(10);
  auto v = random_tensor({5, 3, 3}, rng);
  Tensor<D> maps({2, 3, 3});
  maps[4] = 1000;       // glimpse 0 at (1, 1)
  maps[9 + 7] = 1000;   // glimpse 1 at (2, 1)
  const auto out = apply_attention(maps, v);
  for (std::size_t ch = 0; ch < 5; ++ch) {
    EXPECT_NEAR(out.attended[ch], v[ch * 9 + 4], 1e-4);
    EXPECT_NEAR(out.attended[5 + ch], v[ch * 9 + 7], 1e-4);
  }
}

TEST(ApplyAttentionTest, MatchesNaiveLoop) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto maps = random_tensor({2, 8, 8}, rng, -4, 4);
    auto v = random_tensor({6, 8, 8}, rng);
    const auto expected = oracle::attention_loop(maps, v);
    const auto got = apply_attention(maps, v).attended;
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-6);
  }
}

TEST(ApplyAttentionTest, WeightsSumToOneAndShiftInvariant) {
  Rng rng(12);
  auto maps = random_tensor({2, 8, 8}, rng, -50, 50);
  auto v = random_tensor({4, 8, 8}, rng);
  const auto out = apply_attention(maps, v);
  for (std::size_t g = 0; g < 2; ++g) {
    double s = 0;
    for (std::size_t p = 0; p < 64; ++p) s += out.weights[g * 64 + p];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  auto shifted = maps.detach();
  for (std::size_t p = 0; p < 64; ++p) shifted[p] += 123.0;
  const auto moved = apply_attention(shifted, v);
  for (std::size_t i = 0; i < out.weights.numel(); ++i) EXPECT_NEAR(moved.weights[i], out.weights[i], 1e-6);
  for (std::size_t i = 0; i < out.attended.numel(); ++i) EXPECT_NEAR(moved.attended[i], out.attended[i], 1e-6);
}

TEST(ApplyAttentionTest, AttendedInConvexHull) {
  Rng rng(13);
  auto maps = random_tensor({2, 4, 4}, rng, -5, 5);
  auto v = random_tensor({3, 4, 4}, rng);
  const auto out = apply_attention(maps, v);
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const auto col = std::span<const D>(v.data()).subspan(ch * 16, 16);
      EXPECT_GE(out.attended[g * 3 + ch], *std::min_element(col.begin(), col.end()) - 1e-12);
      EXPECT_LE(out.attended[g * 3 + ch], *std::max_element(col.begin(), col.end()) + 1e-12);
    }
  }
}

TEST(ApplyAttentionTest, BatchedMatchesPerSample) {
  Rng rng(14);
  auto maps = random_tensor({3, 2, 4, 4}, rng, -2, 2);
  auto v = random_tensor({3, 5, 4, 4}, rng);
  const auto batched = apply_attention(maps, v).attended;
  ASSERT_EQ(batched.shape(), (Shape{3, 10}));
  for (std::size_t n = 0; n < 3; ++n) {
    const auto single = apply_attention(reshape(slice(maps, 0, n, n + 1), {2, 4, 4}),
                                        reshape(slice(v, 0, n, n + 1), {5, 4, 4}))
                            .attended;
    for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(batched[n * 10 + i], single[i], 1e-15);
  }
}

TEST(ApplyAttentionTest, SpatialMismatch) {
  EXPECT_THROW(apply_attention(Tensor<D>({2, 4, 4}), Tensor<D>({3, 4, 5})), DimensionError);
}

TEST(ApplyAttentionTest, GradientCheck) {
  Rng rng(15);
  auto maps = random_param({2, 3, 3}, rng, -2, 2);
  auto v = random_param({4, 3, 3}, rng);
  expect_fd_gradients([&] { return project(apply_attention(maps, v).attended, 5); }, {maps, v}, 1e-6);
}

TEST(AttentionGridTest, SixDecimalsOneRowPerLine) {
  Tensor<D> w({2, 2}, std::vector<D>{0.1, 0.2, 0.3, 0.4});
  std::ostringstream os;
  write_attention_grid(os, w);
  EXPECT_EQ(os.str(), "0.100000 0.200000\n0.300000 0.400000\n");
}

}  // namespace
}  // namespace vqa
