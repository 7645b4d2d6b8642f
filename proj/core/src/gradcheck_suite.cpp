#include "vqa/gradcheck_suite.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "vqa/attention.hpp"
#include "vqa/counting.hpp"
#include "vqa/dataset.hpp"
#include "vqa/fusion.hpp"
#include "vqa/image_encoder.hpp"
#include "vqa/model.hpp"
#include "vqa/ops.hpp"
#include "vqa/question_encoder.hpp"

namespace vqa {

namespace {

using D = double;

Tensor<D> random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<D> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor<D> random_leaf(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  auto t = random_tensor(std::move(shape), rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Fixed random projection to a scalar, so no output direction cancels.
Tensor<D> probe(const Tensor<D>& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

struct Check {
  std::string name;
  bool smooth;
  std::function<SuiteCheck()> run;
};

SuiteCheck check(const std::string& name, bool smooth, const std::function<Tensor<D>()>& f,
                 const NamedTensors<D>& params, std::size_t max_coords = 64, double step = 1e-5) {
  GradCheckOptions options;
  options.tolerance = smooth ? kSmoothTolerance : kKinkedTolerance;
  options.max_coords = max_coords;
  options.step = step;
  options.floor = 1e-6;
  options.refinements = smooth ? 0 : 2;
  const auto start = std::chrono::steady_clock::now();
  SuiteCheck out{name, smooth, grad_check(f, params, options), 0};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<Check> layer_checks(const ModelConfig& config) {
  std::vector<Check> checks;
  checks.push_back({"linear", true, [] {
                      Rng rng(11);
                      Linear<D> layer(5, 4, rng);
                      auto x = random_leaf({3, 5}, rng);
                      NamedTensors<D> params = {{"x", x}};
                      layer.collect(params, "linear");
                      return check("linear", true, [&] { return probe(layer.forward(x), 1); }, params);
                    }});
  checks.push_back({"conv2d", true, [] {
                      Rng rng(12);
                      Conv2dLayer<D> layer(3, 4, 3, 1, 1, rng);
                      auto x = random_leaf({2, 3, 6, 6}, rng);
                      NamedTensors<D> params = {{"x", x}};
                      layer.collect(params, "conv");
                      return check("conv2d", true, [&] { return probe(layer.forward(x), 2); }, params);
                    }});
  checks.push_back({"gru_cell", true, [] {
                      Rng rng(13);
                      GRUCell<D> cell(6, 5, rng);
                      auto e = random_leaf({3, 6}, rng);
                      auto h = random_leaf({3, 5}, rng);
                      NamedTensors<D> params = {{"e", e}, {"h", h}};
                      cell.collect(params, "gru");
                      return check("gru_cell", true, [&] { return probe(cell.step(e, h), 3); }, params);
                    }});
  checks.push_back({"question_encoder", true, [] {
                      Rng rng(14);
                      QuestionEncoder<D> encoder(10, 6, 5, 5, rng);
                      const std::vector<std::vector<std::size_t>> questions = {
                          {2, 3, 4, 5, 6}, {7, 2, 0, 0, 0}, {9, 8, 3, 0, 0}};
                      NamedTensors<D> params;
                      encoder.collect(params, "question");
                      return check("question_encoder", true, [&] { return probe(encoder.encode(questions), 4); },
                                   params);
                    }});
  checks.push_back({"batch_norm", true, [] {
                      Rng rng(15);
                      BatchNorm<D> bn(5);
                      bn.gamma = random_leaf({5}, rng, 0.5, 1.5);
                      bn.beta = random_leaf({5}, rng);
                      auto x = random_leaf({8, 5}, rng);
                      NamedTensors<D> params = {{"x", x}};
                      bn.collect(params, "bn");
                      return check("batch_norm", true, [&] { return probe(bn.forward(x), 5); }, params);
                    }});
  checks.push_back({"backbone", false, [] {
                      Rng rng(16);
                      Backbone<D> backbone(rng);
                      auto image = random_tensor({1, kImageChannels, kImageSize, kImageSize}, rng, 0, 1);
                      NamedTensors<D> params;
                      backbone.collect(params, "cnn");
                      return check("backbone", false, [&] { return probe(cnn_forward(image, backbone), 6); }, params,
                                   24);
                    }});
  checks.push_back({"l2_normalize", true, [] {
                      Rng rng(17);
                      auto v = random_leaf({2, 4, 3, 3}, rng);
                      return check("l2_normalize", true, [&] { return probe(l2_normalize_features(v), 7); },
                                   {{"V", v}});
                    }});
  checks.push_back({"fuse", false, [] {
                      Rng rng(18);
                      auto x = random_leaf({4, 6}, rng);
                      auto y = random_leaf({4, 6}, rng);
                      return check("fuse", false, [&] { return probe(fuse(x, y), 8); }, {{"x", x}, {"y", y}});
                    }});
  checks.push_back({"apply_attention", true, [] {
                      Rng rng(19);
                      auto maps = random_leaf({2, 2, 4, 4}, rng, -2, 2);
                      auto features = random_leaf({2, 3, 4, 4}, rng);
                      return check("apply_attention", true,
                                   [&] { return probe(apply_attention(maps, features).attended, 9); },
                                   {{"maps", maps}, {"features", features}});
                    }});
  checks.push_back({"attention", false, [] {
                      Rng rng(20);
                      Attention<D> attention(6, 4, 5, kGlimpses, rng);
                      auto features = random_leaf({2, 6, 4, 4}, rng);
                      auto q = random_leaf({2, 4}, rng);
                      NamedTensors<D> params = {{"features", features}, {"q", q}};
                      attention.collect(params, "attention");
                      Rng unused(0);
                      return check("attention", false,
                                   [&] { return probe(attention.forward(features, q, Mode::kEval, unused).attended, 10); },
                                   params);
                    }});
  checks.push_back({"soft_count", true, [] {
                      Rng rng(21);
                      auto scores = random_leaf({5}, rng, 0.05, 0.95);
                      const std::vector<Box> boxes = {{0.1, 0.1, 0.4, 0.4},
                                                      {0.15, 0.12, 0.42, 0.45},
                                                      {0.6, 0.6, 0.9, 0.8},
                                                      {0.55, 0.58, 0.88, 0.85},
                                                      {0.1, 0.7, 0.2, 0.9}};
                      auto iou = iou_matrix<D>(boxes);
                      return check("soft_count", true, [&] { return probe(soft_count(scores, iou, 0.5, 20.0), 11); },
                                   {{"scores", scores}});
                    }});
  checks.push_back({"counter", false, [config] {
                      Rng rng(22);
                      auto logits = random_leaf({kFeatureGrid, kFeatureGrid}, rng, -2, 2);
                      // Box corners as a differentiable tensor; the IoU path
                      // and the score path are checked together.
                      auto coords = Tensor<D>({3, 4}, {0.1, 0.1, 0.45, 0.4, 0.2, 0.15, 0.5, 0.47, 0.6, 0.55, 0.9, 0.85});
                      coords.set_requires_grad(true);
                      const std::vector<Box> boxes = {{0.1, 0.1, 0.45, 0.4}, {0.2, 0.15, 0.5, 0.47}, {0.6, 0.55, 0.9, 0.85}};
                      auto f = [&] {
                        auto a = box_attention_scores(logits, boxes);
                        auto count = soft_count(a, iou_matrix(coords), config.count_tau, config.count_kappa);
                        return probe(count_feature_vector(count, config.max_count), 12);
                      };
                      return check("counter", false, f, {{"A1", logits}, {"boxes", coords}});
                    }});
  checks.push_back({"fusion_head", false, [config] {
                      Rng rng(23);
                      FusionHead<D> head(6, 4, config.max_count + 1, 7, 5, rng);
                      head.count_norm.gamma = random_leaf({7}, rng, 0.5, 1.5);
                      head.count_norm.beta = random_leaf({7}, rng);
                      auto attended = random_leaf({8, 6}, rng);
                      auto q = random_leaf({8, 4}, rng);
                      auto c = random_leaf({8, config.max_count + 1}, rng, 0, 1);
                      NamedTensors<D> params = {{"V_att", attended}, {"q", q}, {"c", c}};
                      head.collect(params, "head");
                      const std::vector<std::size_t> targets = {0, 1, 2, 3, 4, 0, 1, 2};
                      auto f = [&] {
                        auto x = head.integrate_count(head.fuse_modalities(attended, q), c);
                        return cross_entropy_loss(head.predict(x), std::span<const std::size_t>(targets), 0.1);
                      };
                      return check("fusion_head", false, f, params);
                    }});
  checks.push_back({"cross_entropy", true, [] {
                      Rng rng(24);
                      auto logits = random_leaf({4, 6}, rng, -3, 3);
                      const std::vector<std::size_t> targets = {5, 0, 2, 2};
                      return check("cross_entropy", true,
                                   [&] { return cross_entropy_loss(logits, std::span<const std::size_t>(targets), 0.1); },
                                   {{"logits", logits}});
                    }});
  return checks;
}

SuiteCheck end_to_end(const ModelConfig& config) {
  ModelConfig c = config;
  c.dropout_rate = 0;
  c.ablation = Ablation::kNone;
  // Two complete pairs, one number and one count question.
  const auto data = generate_dataset(c.seed, 1, 0).train;
  const std::vector<Sample> samples = {data[0], data[1], data[2], data[3]};
  std::vector<std::vector<std::string>> corpus;
  for (const auto& s : data) corpus.push_back(s.question);
  const auto vocab = Vocabulary::build(corpus, c.token_size);
  VqaModel<D> model(c, vocab.size());
  const auto batch = make_batch<D>(samples, vocab, c.max_question_length);
  Rng rng(0);
  auto f = [&] {
    auto out = model.forward(batch, Mode::kTrain, rng);
    return cross_entropy_loss(out.logits, std::span<const std::size_t>(batch.targets), c.label_smoothing);
  };
  return check("end_to_end", false, f, model.parameters(), 8);
}

}  // namespace

bool SuiteResult::passed() const {
  for (const auto& c : checks) {
    if (!c.report.passed) return false;
  }
  return !checks.empty();
}

SuiteResult run_gradcheck_suite(const ModelConfig& config, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  auto report = [&](const SuiteCheck& c) {
    if (!log) return;
    char line[160];
    std::snprintf(line, sizeof line, "%s %-18s max rel err %.3e (tol %.0e, %zu coords, %.2f s)",
                  c.report.passed ? "PASS" : "FAIL", c.name.c_str(), c.report.max_rel_error,
                  c.smooth ? kSmoothTolerance : kKinkedTolerance, c.report.entries.size(), c.seconds);
    *log << line;
    if (!c.report.passed) {
      *log << "  failing:";
      for (const auto& name : c.report.failed_tensors()) *log << ' ' << name;
    }
    *log << std::endl;
  };
  for (const auto& c : layer_checks(config)) {
    result.checks.push_back(c.run());
    report(result.checks.back());
  }
  result.checks.push_back(end_to_end(config));
  report(result.checks.back());
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace vqa
