#pragma once

// Training objective: L1 + lambda * perceptual distance.
//
// The perceptual term uses a frozen, seed-determined random conv stack as the
// feature extractor instead of pretrained VGG19 weights. It stays
// differentiable with respect to its inputs and is reproducible from the seed.

#include <array>
#include <cstdint>

#include "hpgn/layers.hpp"

namespace hpgn {

enum class PerceptualMode { fixed_random_features, off };

struct LossConfig {
  double lambda_per = 0.01;
  PerceptualMode mode = PerceptualMode::fixed_random_features;
  std::uint64_t extractor_seed = 19;

  void validate() const;
};

/// Mean absolute difference; shapes must match.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& prediction, const Tensor<T>& target);

/// Four stride-2 3x3 conv stages (3 -> 16 -> 32 -> 64 -> 64), leaky ReLU 0.2.
template <typename T>
class PerceptualExtractor {
 public:
  explicit PerceptualExtractor(std::uint64_t seed);

  /// Stage-3 and stage-4 activations. Input must be N x 3 x H x W with H, W >= 16.
  std::array<Tensor<T>, 2> features(const Tensor<T>& x) const;

  /// Mean of the stage-3 and stage-4 mean absolute feature differences.
  Tensor<T> loss(const Tensor<T>& a, const Tensor<T>& b) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<Conv2d<T>, 4> stages_;
};

template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& a, const Tensor<T>& b, std::uint64_t extractor_seed) {
  return PerceptualExtractor<T>(extractor_seed).loss(a, b);
}

/// l1 + lambda_per * perceptual, or pure l1 when the perceptual mode is off.
/// `extractor`, when given, must have been built from config.extractor_seed.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& prediction, const Tensor<T>& target, const LossConfig& config,
                     const PerceptualExtractor<T>* extractor = nullptr);

}  // namespace hpgn
