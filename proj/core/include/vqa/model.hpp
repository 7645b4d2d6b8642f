#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqa/attention.hpp"
#include "vqa/config.hpp"
#include "vqa/counting.hpp"
#include "vqa/dataset.hpp"
#include "vqa/fusion.hpp"
#include "vqa/image_encoder.hpp"
#include "vqa/question_encoder.hpp"

namespace vqa {

template <typename T>
struct Batch {
  Tensor<T> images;                               // [N x 3 x 64 x 64]
  std::vector<std::vector<std::size_t>> questions;  // padded token ids
  std::vector<std::vector<Box>> boxes;
  std::vector<std::size_t> targets;

  std::size_t size() const { return targets.size(); }
};

// Renders scenes and encodes questions for a run of samples.
template <typename T>
Batch<T> make_batch(std::span<const Sample> samples, const Vocabulary& vocab, std::size_t max_question_length);

template <typename T>
struct ModelOutput {
  Tensor<T> logits;       // [N x answers]
  Tensor<T> q;            // [N x 2h]
  Tensor<T> features;     // [N x C x 8 x 8], normalized
  Tensor<T> attention;    // weights [N x G x 8 x 8]; undefined without attention
  Tensor<T> soft_count;   // [N]; undefined without counting
};

/// Question encoder, CNN backbone, two-glimpse attention, counter and fusion
/// head, wired according to the configured ablation.
template <typename T>
class VqaModel {
 public:
  // The embedding table has one row per vocabulary entry.
  VqaModel(const ModelConfig& config, std::size_t vocab_size, std::size_t answers = kNumAnswers);

  const ModelConfig& config() const { return config_; }

  ModelOutput<T> forward(const Batch<T>& batch, Mode mode, Rng& rng);
  // Argmax of the eval-mode logits, per sample.
  std::vector<std::size_t> predict(const Batch<T>& batch);

  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;  // batch-norm running statistics
  // parameters() followed by buffers(); the checkpoint content.
  NamedTensors<T> state() const;

  QuestionEncoder<T> encoder;
  Backbone<T> backbone;
  Attention<T> attention;
  FusionHead<T> head;

 private:
  ModelConfig config_;
};

}  // namespace vqa
