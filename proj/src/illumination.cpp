#include "hpgn/illumination.hpp"

namespace hpgn {

template <typename T>
IlluminationPriorMap<T> illum_prior(const Tensor<T>& compressed) {
  if (compressed.shape().rank() != 4 || compressed.dim(1) != 3) {
    throw DimensionError("illum_prior: expected N x 3 x H x W input, got " + compressed.shape().str());
  }
  return {ops::channel_mean(compressed)};
}

template <typename T>
IlluminationOutputs<T> estimate(const Tensor<T>& compressed, const IlluminationPriorMap<T>& prior,
                                const IlluminationEstimator<T>& params) {
  const auto& s = compressed.shape();
  const auto& p = prior.map.shape();
  if (s.rank() != 4 || s[1] != 3 || p.rank() != 4 || p[1] != 1 || p[0] != s[0] || p[2] != s[2] || p[3] != s[3]) {
    throw DimensionError("estimate: image " + s.str() + " and prior " + p.str() + " are inconsistent");
  }
  const auto stacked = ops::concat<T>({compressed, prior.map}, 1);
  const auto hidden = params.depthwise(params.fuse_in(stacked));
  return {ops::softplus(params.to_brightness(hidden)), params.to_features(hidden)};
}

template <typename T>
Tensor<T> light_up(const Tensor<T>& brightness, const Tensor<T>& compressed) {
  if (!(brightness.shape() == compressed.shape())) {
    throw DimensionError("light_up: brightness " + brightness.shape().str() + " vs image " +
                         compressed.shape().str());
  }
  return ops::mul(brightness, compressed);
}

template IlluminationPriorMap<float> illum_prior(const Tensor<float>&);
template IlluminationPriorMap<double> illum_prior(const Tensor<double>&);
template IlluminationOutputs<float> estimate(const Tensor<float>&, const IlluminationPriorMap<float>&,
                                             const IlluminationEstimator<float>&);
template IlluminationOutputs<double> estimate(const Tensor<double>&, const IlluminationPriorMap<double>&,
                                              const IlluminationEstimator<double>&);
template Tensor<float> light_up(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> light_up(const Tensor<double>&, const Tensor<double>&);

}  // namespace hpgn
