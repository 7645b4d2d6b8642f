#include "vqa/model.hpp"

#include <algorithm>

#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

template <typename T>
Batch<T> make_batch(std::span<const Sample> samples, const Vocabulary& vocab, std::size_t max_question_length) {
  if (samples.empty()) throw UsageError("make_batch: no samples");
  Batch<T> batch;
  constexpr std::size_t image_numel = kImageChannels * kImageSize * kImageSize;
  batch.images = Tensor<T>({samples.size(), kImageChannels, kImageSize, kImageSize});
  auto px = batch.images.data();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto image = render_scene<T>(s.scene);
    std::copy(image.data().begin(), image.data().end(), px.begin() + static_cast<std::ptrdiff_t>(i * image_numel));
    batch.questions.push_back(pad_ids(vocab.encode(s.question), max_question_length));
    batch.boxes.push_back(s.scene.boxes());
    batch.targets.push_back(s.answer);
  }
  return batch;
}

template <typename T>
VqaModel<T>::VqaModel(const ModelConfig& config, std::size_t vocab_size, std::size_t answers) : config_(config) {
  config_.validate();
  Rng rng(derive_seed(config_.seed, 0));
  encoder = QuestionEncoder<T>(vocab_size, config_.embedding_dim, config_.gru_hidden,
                               config_.max_question_length, rng);
  backbone = Backbone<T>(rng);
  attention = Attention<T>(kFeatureChannels, encoder.output_size(), config_.projection_width, config_.glimpses, rng);
  attention.dropout_rate = config_.dropout_rate;
  head = FusionHead<T>(config_.glimpses * kFeatureChannels, encoder.output_size(), config_.max_count + 1,
                       config_.fused_width, answers, rng);
}

template <typename T>
ModelOutput<T> VqaModel<T>::forward(const Batch<T>& batch, Mode mode, Rng& rng) {
  const Ablation ablation = config_.ablation;
  const std::size_t n = batch.size();
  head.set_mode(mode);

  ModelOutput<T> out;
  out.q = encoder.encode(batch.questions);
  out.features = l2_normalize_features(cnn_forward(batch.images, backbone));

  Tensor<T> attended;
  Tensor<T> maps;
  if (uses_attention(ablation) || uses_count(ablation)) {
    auto att = attention.forward(out.features, out.q, mode, rng);
    maps = att.maps;
    out.attention = att.weights;
    attended = att.attended;
  }
  if (!uses_attention(ablation)) {
    // Uniform pooling: the spatial mean, repeated once per glimpse.
    const std::size_t c = out.features.dim(1);
    auto pooled = mean(reshape(out.features, {n, c, kFeatureGrid * kFeatureGrid}), 2);
    std::vector<Tensor<T>> copies(config_.glimpses, pooled);
    attended = concat(std::span<const Tensor<T>>(copies), 1);
    out.attention = {};
  }

  auto q_fused = uses_text(ablation) ? out.q : Tensor<T>::zeros(out.q.shape());
  auto x = head.fuse_modalities(attended, q_fused);
  if (uses_count(ablation)) {
    CounterOptions options{config_.count_tau, config_.count_kappa, config_.max_count};
    auto count = count_batch(maps, batch.boxes, options);
    out.soft_count = count.soft_count;
    x = head.integrate_count(x, count.c);
  }
  x = dropout(x, config_.dropout_rate, mode, rng);
  out.logits = head.predict(x);
  return out;
}

template <typename T>
std::vector<std::size_t> VqaModel<T>::predict(const Batch<T>& batch) {
  NoGradGuard guard;
  Rng unused(0);
  auto out = forward(batch, Mode::kEval, unused);
  const std::size_t k = out.logits.dim(1);
  std::vector<std::size_t> result;
  auto z = out.logits.data();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = z.subspan(i * k, k);
    result.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return result;
}

template <typename T>
NamedTensors<T> VqaModel<T>::parameters() const {
  NamedTensors<T> out;
  encoder.collect(out, "question");
  backbone.collect(out, "cnn");
  attention.collect(out, "attention");
  head.collect(out, "head");
  return out;
}

template <typename T>
NamedTensors<T> VqaModel<T>::buffers() const {
  NamedTensors<T> out;
  head.collect_buffers(out, "head");
  return out;
}

template <typename T>
NamedTensors<T> VqaModel<T>::state() const {
  auto out = parameters();
  for (auto& b : buffers()) out.push_back(std::move(b));
  return out;
}

template Batch<float> make_batch(std::span<const Sample>, const Vocabulary&, std::size_t);
template Batch<double> make_batch(std::span<const Sample>, const Vocabulary&, std::size_t);
template class VqaModel<float>;
template class VqaModel<double>;

}  // namespace vqa
