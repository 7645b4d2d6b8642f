#include "vqa/image_encoder.hpp"

#include "vqa/errors.hpp"
#include "vqa/ops.hpp"

namespace vqa {

template <typename T>
Backbone<T>::Backbone(Rng& rng)
    : blocks{Conv2dLayer<T>(3, 16, 3, 1, 1, rng), Conv2dLayer<T>(16, 32, 3, 1, 1, rng),
             Conv2dLayer<T>(32, 64, 3, 1, 1, rng), Conv2dLayer<T>(64, kFeatureChannels, 3, 1, 1, rng)} {}

template <typename T>
void Backbone<T>::collect(NamedTensors<T>& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, prefix + ".conv" + std::to_string(i + 1));
}

template <typename T>
Tensor<T> cnn_forward(const Tensor<T>& image, const Backbone<T>& backbone) {
  const auto& s = image.shape();
  const bool batched = s.size() == 4;
  const std::size_t off = batched ? 1 : 0;
  if ((s.size() != 3 && s.size() != 4) || s[off] != kImageChannels || s[off + 1] != kImageSize ||
      s[off + 2] != kImageSize) {
    throw DimensionError("cnn_forward: expected [3 x 64 x 64] or [N x 3 x 64 x 64] image, got " + shape_str(s));
  }
  for (T v : image.data()) {
    if (!(v >= T(0) && v <= T(1))) throw UsageError("cnn_forward: pixel values must lie in [0, 1]");
  }
  Tensor<T> x = image;
  for (std::size_t i = 0; i < backbone.blocks.size(); ++i) {
    x = relu(backbone.blocks[i].forward(x));
    if (i + 1 < backbone.blocks.size()) x = avg_pool2d(x, 2);
  }
  return x;
}

template <typename T>
Tensor<T> l2_normalize_features(const Tensor<T>& features, double epsilon) {
  const std::size_t rows = features.rank() == 4 ? features.dim(0) : 1;
  auto flat = reshape(features, {rows, features.numel() / rows});
  auto denom = add_scalar(row_norm(flat), static_cast<T>(epsilon));
  return reshape(div(flat, denom), features.shape());
}

template struct Backbone<float>;
template struct Backbone<double>;
template Tensor<float> cnn_forward(const Tensor<float>&, const Backbone<float>&);
template Tensor<double> cnn_forward(const Tensor<double>&, const Backbone<double>&);
template Tensor<float> l2_normalize_features(const Tensor<float>&, double);
template Tensor<double> l2_normalize_features(const Tensor<double>&, double);

}  // namespace vqa
