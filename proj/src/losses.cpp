#include "hpgn/losses.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace hpgn {

void LossConfig::validate() const {
  if (!(lambda_per >= 0.0) || !std::isfinite(lambda_per)) {
    throw ConfigError("lambda_per must be a finite non-negative number");
  }
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
  if (!(prediction.shape() == target.shape())) {
    throw DimensionError("l1_loss: " + prediction.shape().str() + " vs " + target.shape().str());
  }
  return ops::mean(ops::abs(ops::sub(prediction, target)));
}

template <typename T>
PerceptualExtractor<T>::PerceptualExtractor(std::uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  constexpr std::array<std::size_t, 5> widths = {3, 16, 32, 64, 64};
  for (std::size_t i = 0; i < 4; ++i) {
    auto& conv = stages_[i];
    conv.options = ops::Conv2dOptions{2, 1, 1};
    conv.weight = Tensor<T>::zeros(Shape{widths[i + 1], widths[i], 3, 3});
    // He-uniform for leaky ReLU keeps activations from vanishing across stages.
    fill_uniform(conv.weight, rng, std::sqrt(6.0 / (widths[i] * 9.0)));
    conv.bias = Tensor<T>::zeros(Shape{widths[i + 1]});
  }
}

template <typename T>
std::array<Tensor<T>, 2> PerceptualExtractor<T>::features(const Tensor<T>& x) const {
  const auto& s = x.shape();
  if (s.rank() != 4 || s[1] != 3 || s[2] < 16 || s[3] < 16) {
    throw DimensionError("perceptual features need N x 3 x H x W with H, W >= 16, got " + s.str());
  }
  Tensor<T> h = x;
  std::array<Tensor<T>, 2> taps;
  for (std::size_t i = 0; i < 4; ++i) {
    h = ops::leaky_relu(stages_[i](h), T(0.2));
    if (i >= 2) taps[i - 2] = h;
  }
  return taps;
}

template <typename T>
Tensor<T> PerceptualExtractor<T>::loss(const Tensor<T>& a, const Tensor<T>& b) const {
  if (!(a.shape() == b.shape())) throw DimensionError("perceptual_loss: " + a.shape().str() + " vs " + b.shape().str());
  const auto fa = features(a);
  const auto fb = features(b);
  const auto d3 = l1_loss(fa[0], fb[0]);
  const auto d4 = l1_loss(fa[1], fb[1]);
  return ops::mul_scalar(ops::add(d3, d4), T(0.5));
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& prediction, const Tensor<T>& target, const LossConfig& config,
                     const PerceptualExtractor<T>* extractor) {
  config.validate();
  auto l1 = l1_loss(prediction, target);
  if (config.mode == PerceptualMode::off || config.lambda_per == 0.0) return l1;
  std::optional<PerceptualExtractor<T>> owned;
  if (!extractor) {
    owned.emplace(config.extractor_seed);
    extractor = &*owned;
  } else if (extractor->seed() != config.extractor_seed) {
    throw ConfigError("total_loss: extractor seed does not match the loss configuration");
  }
  const auto perceptual = extractor->loss(prediction, target);
  return ops::add(l1, ops::mul_scalar(perceptual, static_cast<T>(config.lambda_per)));
}

template Tensor<float> l1_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> l1_loss(const Tensor<double>&, const Tensor<double>&);
template class PerceptualExtractor<float>;
template class PerceptualExtractor<double>;
template Tensor<float> total_loss(const Tensor<float>&, const Tensor<float>&, const LossConfig&,
                                  const PerceptualExtractor<float>*);
template Tensor<double> total_loss(const Tensor<double>&, const Tensor<double>&, const LossConfig&,
                                   const PerceptualExtractor<double>*);

}  // namespace hpgn
