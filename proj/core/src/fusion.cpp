#include "vqa/fusion.hpp"

#include "vqa/attention.hpp"
#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

template <typename T>
FusionHead<T>::FusionHead(std::size_t attended_size, std::size_t question_size, std::size_t count_size,
                          std::size_t width, std::size_t answers, Rng& rng)
    : visual_projection(attended_size, width, rng),
      question_projection(question_size, width, rng),
      count_projection(count_size, width, rng),
      count_norm(width),
      output(width, answers, rng) {}

template <typename T>
Tensor<T> FusionHead<T>::fuse_modalities(const Tensor<T>& attended, const Tensor<T>& q) const {
  return fuse(visual_projection.forward(attended), question_projection.forward(q));
}

template <typename T>
Tensor<T> FusionHead<T>::integrate_count(const Tensor<T>& x, const Tensor<T>& c) {
  if (c.rank() == 1) {
    auto row = count_norm.forward(reshape(relu(count_projection.forward(reshape(c, {1, c.numel()}))),
                                          {1, width()}));
    return add(x, reshape(row, {width()}));
  }
  return add(x, count_norm.forward(relu(count_projection.forward(c))));
}

template <typename T>
Tensor<T> FusionHead<T>::predict(const Tensor<T>& x) const {
  return output.forward(x);
}

template <typename T>
void FusionHead<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  visual_projection.collect(out, prefix + ".visual");
  question_projection.collect(out, prefix + ".question");
  count_projection.collect(out, prefix + ".count");
  count_norm.collect(out, prefix + ".count_bn");
  output.collect(out, prefix + ".output");
}

template <typename T>
void FusionHead<T>::collect_buffers(NamedTensors<T>& out, const std::string& prefix) const {
  count_norm.collect_buffers(out, prefix + ".count_bn");
}

template <typename T>
Tensor<T> probabilities(const Tensor<T>& logits) {
  return softmax(logits, logits.rank() - 1);
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::size_t> targets, double smoothing) {
  return cross_entropy(logits, targets, static_cast<T>(smoothing));
}

template struct FusionHead<float>;
template struct FusionHead<double>;
template Tensor<float> probabilities(const Tensor<float>&);
template Tensor<double> probabilities(const Tensor<double>&);
template Tensor<float> cross_entropy_loss(const Tensor<float>&, std::span<const std::size_t>, double);
template Tensor<double> cross_entropy_loss(const Tensor<double>&, std::span<const std::size_t>, double);

}  // namespace vqa
