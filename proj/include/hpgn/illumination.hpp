#pragma once

// Illumination prior, illumination estimator and light-up product.

#include "hpgn/layers.hpp"

namespace hpgn {

/// N x 1 x H x W per-pixel channel mean of the compressed input.
template <typename T>
struct IlluminationPriorMap {
  Tensor<T> map;
};

template <typename T>
struct IlluminationOutputs {
  Tensor<T> brightness;  // N x 3 x H x W, strictly positive
  Tensor<T> features;    // N x C x H x W
};

/// 1x1 fuse of [image, prior] -> depthwise 5x5 -> two 1x1 heads (features,
/// softplus brightness). No nonlinearity before the heads.
template <typename T>
struct IlluminationEstimator {
  Conv2d<T> fuse_in;
  Conv2d<T> depthwise;
  Conv2d<T> to_features;
  Conv2d<T> to_brightness;

  static IlluminationEstimator create(std::size_t channels, Rng& rng) {
    IlluminationEstimator e;
    e.fuse_in = Conv2d<T>::same(4, channels, 1, rng);
    e.depthwise = Conv2d<T>::same(channels, channels, 5, rng, channels);
    e.to_features = Conv2d<T>::same(channels, channels, 1, rng);
    e.to_brightness = Conv2d<T>::same(channels, 3, 1, rng);
    return e;
  }

  std::size_t channels() const { return fuse_in.out_channels(); }

  void collect(ParamSet<T>& set, const std::string& prefix) const {
    fuse_in.collect(set, prefix + ".fuse_in");
    depthwise.collect(set, prefix + ".depthwise");
    to_features.collect(set, prefix + ".to_features");
    to_brightness.collect(set, prefix + ".to_brightness");
  }
};

/// Throws DimensionError unless the input has 3 channels.
template <typename T>
IlluminationPriorMap<T> illum_prior(const Tensor<T>& compressed);

template <typename T>
IlluminationOutputs<T> estimate(const Tensor<T>& compressed, const IlluminationPriorMap<T>& prior,
                                const IlluminationEstimator<T>& params);

/// Elementwise brightness * compressed, unclamped. Shapes must match exactly.
template <typename T>
Tensor<T> light_up(const Tensor<T>& brightness, const Tensor<T>& compressed);

}  // namespace hpgn
