#pragma once

// End-to-end network: illumination prior and estimator, light-up, hybrid
// information filter, enhancer.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpgn/enhancer.hpp"
#include "hpgn/hif.hpp"
#include "hpgn/illumination.hpp"
#include "hpgn/image.hpp"

namespace hpgn {

/// Ablation variants. `baseline` runs the enhancer alone on the compressed
/// input; the others add the estimator and the selected filter branches.
enum class Variant { baseline, qf_only, qm_only, full };

std::string to_string(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(const std::string& name);

struct ModelConfig {
  EnhancerConfig enhancer;
  Variant variant = Variant::full;

  void validate() const { enhancer.validate(); }
  bool uses_filter() const { return variant != Variant::baseline; }
  HifBranches branches() const { return {variant == Variant::qf_only || variant == Variant::full,
                                         variant == Variant::qm_only || variant == Variant::full}; }
};

template <typename T>
struct ModelOutputs {
  Tensor<T> enhanced;     // I_en
  Tensor<T> light_up;     // undefined for the baseline variant
  Tensor<T> brightness;   // I_bri
  Tensor<T> features;     // F_illum
  Tensor<T> filtered;     // F_fea
};

template <typename T>
struct HpgnModel {
  ModelConfig config;
  std::optional<IlluminationEstimator<T>> estimator;
  std::optional<HifParams<T>> hif;
  EnhancerParams<T> enhancer;

  /// Each sub-network draws from its own stream derived from `seed`, so
  /// variants sharing a seed share the weights of the parts they have in common.
  static HpgnModel create(const ModelConfig& config, std::uint64_t seed);

  /// One QF per sample; QMs default to the luma tables of those QFs.
  ModelOutputs<T> forward(const Tensor<T>& compressed, std::span<const QualityFactor> qfs) const;
  ModelOutputs<T> forward(const Tensor<T>& compressed, std::span<const QualityFactor> qfs,
                          std::span<const QuantizationMatrix> qms) const;

  /// Parameters named "<estimator|hif|enhancer>.<...>" in a fixed order.
  ParamSet<T> parameters() const;
};

/// Full-image inference: reflection-pad to a multiple of 4, forward without a
/// tape, crop back, quantize to 8 bits.
template <typename T>
Image8 enhance_image(const HpgnModel<T>& model, const Image8& compressed, QualityFactor qf);

}  // namespace hpgn
