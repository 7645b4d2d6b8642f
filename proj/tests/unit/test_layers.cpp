#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "vqa/errors.hpp"
#include "vqa/layers.hpp"

namespace vqa {
namespace {

using testing::D;
using testing::expect_fd_gradients;
using testing::project;
using testing::random_param;
using testing::random_tensor;
using testing::values;

template <typename T>
std::vector<Tensor<T>> tensors_of(const NamedTensors<T>& named) {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

TEST(LinearTest, IdentityWeightZeroBias) {
  Rng rng(1);
  Linear<float> layer(3, 3, rng);
  std::fill(layer.weight.data().begin(), layer.weight.data().end(), 0.0f);
  for (std::size_t i = 0; i < 3; ++i) layer.weight[i * 3 + i] = 1;
  std::fill(layer.bias.data().begin(), layer.bias.data().end(), 0.0f);
  Tensor<float> x({3}, std::vector<float>{0.5f, -2, 7});
  EXPECT_EQ(values(layer.forward(x)), values(x));
}

TEST(LinearTest, HandProduct) {
  Rng rng(1);
  Linear<float> layer(2, 1, rng);
  layer.weight[0] = 1;
  layer.weight[1] = 1;
  layer.bias[0] = 1;
  const auto y = layer.forward(Tensor<float>({2}, std::vector<float>{2, 3}));
  EXPECT_EQ(y.shape(), (Shape{1}));
  EXPECT_EQ(y[0], 6);
}

TEST(LinearTest, InitializationIsScaledUniformWithZeroBias) {
  Rng rng(2);
  Linear<D> layer(16, 40, rng);
  const double bound = 1.0 / std::sqrt(16.0);
  for (auto w : layer.weight.data()) EXPECT_LE(std::abs(w), bound);
  for (auto b : layer.bias.data()) EXPECT_EQ(b, 0.0);
}

TEST(LinearTest, DimensionMismatch) {
  Rng rng(1);
  Linear<float> layer(4, 3, rng);
  EXPECT_THROW(layer.forward(Tensor<float>({2, 5})), DimensionError);
}

TEST(LinearTest, GradientCheck) {
  Rng rng(3);
  Linear<D> layer(4, 3, rng);
  for (auto& b : layer.bias.data()) b = rng.uniform(-1, 1);
  auto x = random_param({5, 4}, rng);
  NamedTensors<D> params;
  layer.collect(params, "l");
  auto ts = tensors_of(params);
  ts.push_back(x);
  expect_fd_gradients([&] { return project(layer.forward(x), 1); }, ts, 1e-5);
}

GRUCell<D> zero_cell(std::size_t d, std::size_t h) {
  Rng rng(0);
  GRUCell<D> cell(d, h, rng);
  NamedTensors<D> params;
  cell.collect(params, "c");
  for (auto& [name, t] : params) std::fill(t.data().begin(), t.data().end(), 0.0);
  return cell;
}

TEST(GRUCellTest, ZeroParametersHalveState) {
  const auto cell = zero_cell(3, 4);
  Tensor<D> v({4}, std::vector<D>{1, -2, 0.5, 4});
  const auto out = cell.step(Tensor<D>({3}, std::vector<D>{1, 2, 3}), v);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i], 0.5 * v[i]);
}

TEST(GRUCellTest, ZeroParametersZeroStateStaysZero) {
  const auto cell = zero_cell(3, 4);
  const auto out = cell.step(Tensor<D>({3}, 1.0), Tensor<D>::zeros({4}));
  for (auto v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(GRUCellTest, MatchesHandWrittenEquations) {
  Rng rng(4);
  GRUCell<D> cell(2, 3, rng);
  for (auto* b : {&cell.b_z, &cell.b_r, &cell.b_h}) {
    for (auto& v : b->data()) v = rng.uniform(-1, 1);
  }
  auto e = random_tensor({2}, rng);
  auto h = random_tensor({3}, rng);
  auto sig = [](double x) { return 1 / (1 + std::exp(-x)); };
  auto row = [](const Tensor<D>& m, std::size_t i, const std::vector<D>& x) {
    double s = 0;
    for (std::size_t j = 0; j < x.size(); ++j) s += m[i * x.size() + j] * x[j];
    return s;
  };
  const auto ev = values(e), hv = values(h);
  std::vector<D> r(3), rh(3), expected(3);
  for (std::size_t i = 0; i < 3; ++i) {
    r[i] = sig(row(cell.w_r, i, ev) + row(cell.u_r, i, hv) + cell.b_r[i]);
    rh[i] = r[i] * hv[i];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const double z = sig(row(cell.w_z, i, ev) + row(cell.u_z, i, hv) + cell.b_z[i]);
    const double cand = std::tanh(row(cell.w_h, i, ev) + row(cell.u_h, i, rh) + cell.b_h[i]);
    expected[i] = (1 - z) * hv[i] + z * cand;
  }
  const auto out = cell.step(e, h);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out[i], expected[i], 1e-14);
}

TEST(GRUCellTest, OutputBoundedByStateAndTanhRange) {
  Rng rng(5);
  GRUCell<D> cell(4, 6, rng);
  for (int trial = 0; trial < 50; ++trial) {
    auto e = random_tensor({4}, rng, -5, 5);
    auto h = random_tensor({6}, rng, -3, 3);
    const auto out = cell.step(e, h);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_LE(std::abs(out[i]), std::max(std::abs(h[i]), 1.0) + 1e-12);
  }
}

TEST(GRUCellTest, GradientThroughThreeSteps) {
  Rng rng(6);
  GRUCell<D> cell(5, 7, rng);
  for (auto* b : {&cell.b_z, &cell.b_r, &cell.b_h}) {
    for (auto& v : b->data()) v = rng.uniform(-0.5, 0.5);
  }
  std::vector<Tensor<D>> inputs;
  for (int t = 0; t < 3; ++t) inputs.push_back(random_param({5}, rng));
  auto h0 = random_param({7}, rng);
  auto run = [&] {
    auto h = h0;
    for (const auto& e : inputs) h = cell.step(e, h);
    return project(h, 2);
  };
  NamedTensors<D> params;
  cell.collect(params, "c");
  auto ts = tensors_of(params);
  ts.insert(ts.end(), inputs.begin(), inputs.end());
  ts.push_back(h0);
  // Smooth in every input: a wider step trades truncation for less roundoff on the tiny gradients.
  expect_fd_gradients(run, ts, 1e-6, 1e-5, 1e-4);
}

TEST(GRUCellTest, DimensionMismatch) {
  Rng rng(1);
  GRUCell<float> cell(3, 4, rng);
  EXPECT_THROW(cell.step(Tensor<float>({2}), Tensor<float>({4})), DimensionError);
  EXPECT_THROW(cell.step(Tensor<float>({3}), Tensor<float>({5})), DimensionError);
}

TEST(BatchNormTest, PopulationVarianceHandCase) {
  BatchNorm<D> bn(1);
  const auto y = bn.forward(Tensor<D>({2, 1}, std::vector<D>{0, 2}));
  // var = 1, so the outputs are +-1/sqrt(1 + eps).
  const double s = 1 / std::sqrt(1 + BatchNorm<D>::kEpsilon);
  EXPECT_NEAR(y[0], -s, 1e-15);
  EXPECT_NEAR(y[1], s, 1e-15);
  EXPECT_NEAR(y[0], -1.0, 1e-5);
  // Running stats move 10% toward the batch statistics.
  EXPECT_NEAR(bn.running_mean[0], 0.1, 1e-15);
  EXPECT_NEAR(bn.running_var[0], 0.9 + 0.1 * 1.0, 1e-15);
}

TEST(BatchNormTest, EvalWithUnitStatsIsIdentity) {
  BatchNorm<D> bn(3);
  bn.mode = Mode::kEval;
  Rng rng(7);
  auto x = random_tensor({1, 3}, rng);
  const auto y = bn.forward(x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], x[i], 1e-5 * std::abs(x[i]) + 1e-12);
}

TEST(BatchNormTest, BatchOfOneInTrainModeIsUsageError) {
  BatchNorm<float> bn(2);
  EXPECT_THROW(bn.forward(Tensor<float>({1, 2})), UsageError);
  bn.mode = Mode::kEval;
  EXPECT_NO_THROW(bn.forward(Tensor<float>({1, 2})));
}

TEST(BatchNormTest, TrainOutputIsStandardized) {
  BatchNorm<D> bn(4);
  Rng rng(8);
  auto x = random_tensor({16, 4}, rng, -3, 7);
  const auto y = bn.forward(x);
  for (std::size_t f = 0; f < 4; ++f) {
    double m = 0, v = 0;
    for (std::size_t n = 0; n < 16; ++n) m += y[n * 4 + f];
    m /= 16;
    for (std::size_t n = 0; n < 16; ++n) v += (y[n * 4 + f] - m) * (y[n * 4 + f] - m);
    v /= 16;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(BatchNormTest, TrainModeGradientCheck) {
  BatchNorm<D> bn(3);
  Rng rng(9);
  for (auto& g : bn.gamma.data()) g = rng.uniform(0.5, 1.5);
  for (auto& b : bn.beta.data()) b = rng.uniform(-1, 1);
  auto x = random_param({5, 3}, rng);
  NamedTensors<D> params;
  bn.collect(params, "bn");
  auto ts = tensors_of(params);
  ts.push_back(x);
  expect_fd_gradients([&] { return project(bn.forward(x), 3); }, ts, 1e-6);
}

TEST(DropoutTest, RateZeroAndEvalAreIdentity) {
  Rng rng(10);
  auto x = random_tensor({50}, rng);
  EXPECT_EQ(values(dropout(x, 0.0, Mode::kTrain, rng)), values(x));
  EXPECT_EQ(values(dropout(x, 0.7, Mode::kEval, rng)), values(x));
}

TEST(DropoutTest, RateOneIsConfigError) {
  Rng rng(1);
  EXPECT_THROW(dropout(Tensor<float>({3}), 1.0, Mode::kTrain, rng), ConfigError);
}

TEST(DropoutTest, SurvivorFractionAndMeanPreserved) {
  Rng rng(11);
  Tensor<D> x({100000}, 1.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng drop(seed);
    const auto y = dropout(x, 0.5, Mode::kTrain, drop);
    std::size_t alive = 0;
    double total = 0;
    for (auto v : y.data()) {
      if (v != 0) {
        ++alive;
        EXPECT_EQ(v, 2.0);
      }
      total += v;
    }
    EXPECT_NEAR(static_cast<double>(alive) / 1e5, 0.5, 0.01);
    EXPECT_NEAR(total / 1e5, 1.0, 0.02);
  }
}

}  // namespace
}  // namespace vqa
