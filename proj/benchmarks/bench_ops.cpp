#include <benchmark/benchmark.h>

#include <numeric>

#include "vqa/counting.hpp"
#include "vqa/dataset.hpp"
#include "vqa/model.hpp"
#include "vqa/ops.hpp"
#include "vqa/optimizer.hpp"

namespace vqa {
namespace {

Tensor<float> random_tensor(Shape shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

// Backbone-sized convolutions over a batch of 64.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c_in = static_cast<std::size_t>(state.range(0));
  const auto c_out = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  Rng rng(1);
  auto x = random_tensor({64, c_in, side, side}, rng);
  auto k = random_tensor({c_out, c_in, 3, 3}, rng);
  auto b = random_tensor({c_out}, rng);
  k.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    k.zero_grad();
    b.zero_grad();
    backward(sum(conv2d(x, k, b, 1, 1)));
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({3, 16, 64})->Args({16, 32, 32})->Args({32, 64, 16})->Args({64, 64, 8});

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto a = random_tensor({n, n}, rng);
  const auto b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(4)->Range(16, 1024);

void BM_SoftCount(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0, 0.8), y = rng.uniform(0, 0.8);
    boxes.push_back({x, y, x + rng.uniform(0.05, 0.2), y + rng.uniform(0.05, 0.2)});
  }
  const auto logits = random_tensor({8, 8}, rng);
  for (auto _ : state) {
    const auto scores = box_attention_scores(logits, boxes);
    benchmark::DoNotOptimize(soft_count(scores, iou_matrix<float>(boxes), 0.5, 20.0).item());
  }
}
BENCHMARK(BM_SoftCount)->Arg(4)->Arg(8)->Arg(32);

// One optimizer step of the default model on a batch of 64 synthetic samples.
void BM_TrainStep(benchmark::State& state) {
  const auto data = generate_dataset(7, 22, 0);
  std::vector<Sample> samples(data.train.begin(), data.train.begin() + 64);
  std::vector<std::vector<std::string>> corpus;
  for (const auto& s : data.train) corpus.push_back(s.question);
  ModelConfig config;
  const auto vocab = Vocabulary::build(corpus, config.token_size);
  VqaModel<float> model(config, vocab.size());
  std::vector<Tensor<float>> params;
  for (const auto& [name, t] : model.parameters()) params.push_back(t);
  OptimizerState<float> optimizer(params);
  const auto batch = make_batch<float>(samples, vocab, config.max_question_length);
  Rng rng(4);
  for (auto _ : state) {
    auto out = model.forward(batch, Mode::kTrain, rng);
    backward(cross_entropy_loss(out.logits, std::span<const std::size_t>(batch.targets)));
    adam_step(optimizer);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * samples.size()));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace vqa

BENCHMARK_MAIN();
