#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "vqa/errors.hpp"
#include "vqa/image_encoder.hpp"

namespace vqa {
namespace {

using testing::D;
using testing::expect_fd_gradients;
using testing::project;
using testing::random_tensor;
using testing::values;

double norm(const Tensor<D>& t) {
  double s = 0;
  for (auto v : t.data()) s += v * v;
  return std::sqrt(s);
}

TEST(BackboneTest, OutputShape) {
  Rng rng(1);
  Backbone<float> backbone(rng);
  EXPECT_EQ(cnn_forward(Tensor<float>({3, 64, 64}, 0.5f), backbone).shape(), (Shape{64, 8, 8}));
  EXPECT_EQ(cnn_forward(Tensor<float>({2, 3, 64, 64}, 0.5f), backbone).shape(), (Shape{2, 64, 8, 8}));
}

TEST(BackboneTest, ChannelPlan) {
  Rng rng(1);
  Backbone<float> backbone(rng);
  const std::size_t channels[] = {3, 16, 32, 64, 64};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(backbone.blocks[i].kernels.shape(), (Shape{channels[i + 1], channels[i], 3, 3}));
    EXPECT_EQ(backbone.blocks[i].padding, 1u);
  }
}

TEST(BackboneTest, ZeroImageWithZeroBiasesGivesZeroFeatures) {
  Rng rng(2);
  Backbone<float> backbone(rng);
  for (auto& b : backbone.blocks) std::fill(b.bias.data().begin(), b.bias.data().end(), 0.0f);
  const auto features = cnn_forward(Tensor<float>::zeros({3, 64, 64}), backbone);
  for (auto v : features.data()) EXPECT_EQ(v, 0.0f);
}

TEST(BackboneTest, WrongInputShape) {
  Rng rng(1);
  Backbone<float> backbone(rng);
  EXPECT_THROW(cnn_forward(Tensor<float>({1, 64, 64}), backbone), DimensionError);
  EXPECT_THROW(cnn_forward(Tensor<float>({3, 32, 32}), backbone), DimensionError);
}

TEST(BackboneTest, Deterministic) {
  Rng rng(3);
  Backbone<float> backbone(rng);
  Rng img_rng(4);
  Tensor<float> image({3, 64, 64});
  for (auto& v : image.data()) v = static_cast<float>(img_rng.uniform());
  EXPECT_EQ(values(cnn_forward(image, backbone)), values(cnn_forward(image, backbone)));
}

TEST(BackboneTest, GradientCheck) {
  Rng rng(5);
  Backbone<D> backbone(rng);
  for (auto& b : backbone.blocks) {
    for (auto& v : b.bias.data()) v = rng.uniform(-0.1, 0.1);
  }
  auto image = random_tensor({3, 64, 64}, rng, 0, 1);
  NamedTensors<D> params;
  backbone.collect(params, "cnn");
  // Biases and the last kernel: a full sweep over every kernel would take
  // minutes, and the library suite subsamples the rest.
  std::vector<Tensor<D>> ts;
  for (auto& [name, t] : params) {
    if (name.find("bias") != std::string::npos) ts.push_back(t);
  }
  ts.push_back(backbone.blocks[0].kernels);
  // A bias moves a whole channel, so some position usually sits within 1e-6
  // of a relu or max-pool kink; step refinement steps past it.
  expect_fd_gradients([&] { return project(cnn_forward(image, backbone), 1); }, ts, 1e-4,
                      testing::FdOptions{.h = 1e-6, .floor = 1e-6, .refinements = 2});
}

TEST(L2NormalizeTest, SingleElement) {
  const auto y = l2_normalize_features(Tensor<D>({1}, std::vector<D>{3}));
  EXPECT_NEAR(y[0], 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(L2NormalizeTest, ZeroStaysZero) {
  const auto y = l2_normalize_features(Tensor<D>::zeros({64, 8, 8}));
  for (auto v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(L2NormalizeTest, RandomNormJustBelowOne) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = random_tensor({64, 8, 8}, rng, -2, 2);
    const double n = norm(l2_normalize_features(v));
    EXPECT_GT(n, 1 - 1e-6);
    EXPECT_LE(n, 1.0);
    EXPECT_NEAR(n, norm(v) / (norm(v) + 1e-8), 1e-12);
  }
}

TEST(L2NormalizeTest, ScaleInvariant) {
  Rng rng(7);
  auto v = random_tensor({4, 3, 3}, rng);
  const auto a = l2_normalize_features(v);
  const auto b = l2_normalize_features(scale(v, 37.5));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
}

TEST(L2NormalizeTest, BatchIsPerSample) {
  Rng rng(8);
  auto v = random_tensor({3, 4, 2, 2}, rng);
  const auto batched = l2_normalize_features(v);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto single = l2_normalize_features(reshape(slice(v, 0, n, n + 1), {4, 2, 2}));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(batched[n * 16 + i], single[i], 1e-15);
  }
}

TEST(L2NormalizeTest, GradientCheck) {
  Rng rng(9);
  auto v = testing::random_param({2, 3, 2, 2}, rng);
  expect_fd_gradients([&] { return project(l2_normalize_features(v), 2); }, {v}, 1e-6);
}

}  // namespace
}  // namespace vqa
