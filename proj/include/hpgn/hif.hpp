#pragma once

// Hybrid information filter: quality-factor conditioned channel affine
// modulation, quantization-matrix conditioned spatial attention, and their sum.

#include <cstdint>
#include <optional>
#include <span>

#include "hpgn/jpeg_prior.hpp"
#include "hpgn/layers.hpp"

namespace hpgn {

inline constexpr std::size_t kHifHiddenWidth = 64;

/// Per-sample channel scale and shift, N x C x 1 x 1 each.
template <typename T>
struct QfCoefficients {
  Tensor<T> scale;
  Tensor<T> shift;
};

/// Per-sample spatial attention, N x 1 x H x W, values in (0, 1).
template <typename T>
struct QmAttention {
  Tensor<T> map;
};

template <typename T>
struct HifParams {
  Mlp<T> qf_mlp;         // 1 -> 64 -> 64 -> 2C (raw scale | raw shift)
  Mlp<T> qm_embed;       // 64 -> 64 -> 64 -> C
  Conv2d<T> qm_spatial;  // 2C -> 1, 3x3

  static HifParams create(std::size_t channels, Rng& rng) {
    HifParams p;
    p.qf_mlp = Mlp<T>({1, kHifHiddenWidth, kHifHiddenWidth, 2 * channels}, rng);
    p.qm_embed = Mlp<T>({64, kHifHiddenWidth, kHifHiddenWidth, channels}, rng);
    p.qm_spatial = Conv2d<T>::same(2 * channels, 1, 3, rng);
    return p;
  }

  std::size_t channels() const { return qm_spatial.weight.dim(1) / 2; }

  /// Learnable scalars of both branches for width C.
  static constexpr std::size_t parameter_count(std::size_t c) {
    constexpr std::size_t h = kHifHiddenWidth;
    const std::size_t qf = (1 * h + h) + (h * h + h) + (h * 2 * c + 2 * c);
    const std::size_t qm = (64 * h + h) + (h * h + h) + (h * c + c) + (2 * c * 9 + 1);
    return qf + qm;
  }

  void collect(ParamSet<T>& set, const std::string& prefix, bool with_qf = true, bool with_qm = true) const {
    if (with_qf) qf_mlp.collect(set, prefix + ".qf_mlp");
    if (with_qm) {
      qm_embed.collect(set, prefix + ".qm_embed");
      qm_spatial.collect(set, prefix + ".qm_spatial");
    }
  }
};

/// qf/100 -> MLP -> (1 + tanh(raw_scale), raw_shift). `qfs` holds one value per sample.
template <typename T>
QfCoefficients<T> qf_coefficients(std::span<const QualityFactor> qfs, const HifParams<T>& params);

/// features * scale + shift with channel broadcast.
template <typename T>
Tensor<T> qf_branch(const Tensor<T>& features, std::span<const QualityFactor> qfs, const HifParams<T>& params);

/// sigmoid(conv3x3([features, tile(MLP(qm / 255))])).
template <typename T>
QmAttention<T> qm_attention(const Tensor<T>& features, std::span<const QuantizationMatrix> qms,
                            const HifParams<T>& params);

/// features * attention with spatial broadcast.
template <typename T>
Tensor<T> qm_branch(const Tensor<T>& features, std::span<const QuantizationMatrix> qms, const HifParams<T>& params);

/// Elementwise sum; shapes must be identical.
template <typename T>
Tensor<T> fuse(const Tensor<T>& qf_features, const Tensor<T>& qm_features);

/// Which branches take part in the filtered output.
struct HifBranches {
  bool qf = true;
  bool qm = true;
};

/// fuse(qf_branch, qm_branch) or the single enabled branch.
template <typename T>
Tensor<T> hif_forward(const Tensor<T>& features, std::span<const QualityFactor> qfs,
                      std::span<const QuantizationMatrix> qms, const HifParams<T>& params, HifBranches branches = {});

/// Feature transform for insertion into a host network between its encoder
/// and decoder stages. When the host width differs from the filter width a
/// pair of 1x1 projections adapts it.
template <typename T>
class HifHandle {
 public:
  HifHandle(std::size_t host_channels, HifParams<T> params, std::optional<std::uint64_t> adapter_seed);

  Tensor<T> operator()(const Tensor<T>& features, std::span<const QualityFactor> qfs,
                       std::span<const QuantizationMatrix> qms) const;

  std::size_t host_channels() const { return host_channels_; }
  bool adapted() const { return project_in_.has_value(); }
  void collect(ParamSet<T>& set, const std::string& prefix) const;

 private:
  std::size_t host_channels_;
  HifParams<T> params_;
  std::optional<Conv2d<T>> project_in_;
  std::optional<Conv2d<T>> project_out_;
};

/// Throws ConfigError when widths differ and no adapter seed is given.
template <typename T>
HifHandle<T> attach(std::size_t host_channels, const HifParams<T>& params,
                    std::optional<std::uint64_t> adapter_seed = std::nullopt) {
  return HifHandle<T>(host_channels, params, adapter_seed);
}

}  // namespace hpgn
