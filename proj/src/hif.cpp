#include "hpgn/hif.hpp"

#include <string>

namespace hpgn {

namespace {

void require_batch(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw DimensionError(std::string(what) + ": expected one prior per sample (" + std::to_string(expected) +
                         "), got " + std::to_string(got));
  }
}

template <typename T>
void require_features(const Tensor<T>& f, std::size_t channels, const char* what) {
  if (f.shape().rank() != 4 || f.dim(1) != channels) {
    throw DimensionError(std::string(what) + ": features " + f.shape().str() + " do not have " +
                         std::to_string(channels) + " channels");
  }
}

}  // namespace

template <typename T>
QfCoefficients<T> qf_coefficients(std::span<const QualityFactor> qfs, const HifParams<T>& params) {
  const std::size_t n = qfs.size(), c = params.channels();
  std::vector<T> embed(n);
  for (std::size_t i = 0; i < n; ++i) embed[i] = static_cast<T>(qfs[i].value()) / T(100);
  const auto raw = params.qf_mlp(Tensor<T>::from(Shape{n, 1, 1, 1}, std::move(embed)));
  auto scale = ops::add_scalar(ops::tanh(ops::narrow(raw, 1, 0, c)), T(1));
  auto shift = ops::narrow(raw, 1, c, c);
  return {std::move(scale), std::move(shift)};
}

template <typename T>
Tensor<T> qf_branch(const Tensor<T>& features, std::span<const QualityFactor> qfs, const HifParams<T>& params) {
  require_features(features, params.channels(), "qf_branch");
  require_batch(features.dim(0), qfs.size(), "qf_branch");
  const auto coeffs = qf_coefficients(qfs, params);
  return ops::add(ops::mul(features, coeffs.scale), coeffs.shift);
}

template <typename T>
QmAttention<T> qm_attention(const Tensor<T>& features, std::span<const QuantizationMatrix> qms,
                            const HifParams<T>& params) {
  require_features(features, params.channels(), "qm_branch");
  require_batch(features.dim(0), qms.size(), "qm_branch");
  const std::size_t n = qms.size();
  std::vector<T> flat(n * 64);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = qm_to_feature_vector(qms[i]);
    for (std::size_t k = 0; k < 64; ++k) flat[i * 64 + k] = static_cast<T>(v[k]);
  }
  const auto embed = params.qm_embed(Tensor<T>::from(Shape{n, 64, 1, 1}, std::move(flat)));
  const auto tiled = ops::broadcast_to(embed, features.shape());
  const auto logits = params.qm_spatial(ops::concat<T>({features, tiled}, 1));
  return {ops::sigmoid(logits)};
}

template <typename T>
Tensor<T> qm_branch(const Tensor<T>& features, std::span<const QuantizationMatrix> qms, const HifParams<T>& params) {
  return ops::mul(features, qm_attention(features, qms, params).map);
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& qf_features, const Tensor<T>& qm_features) {
  if (!(qf_features.shape() == qm_features.shape())) {
    throw DimensionError("fuse: " + qf_features.shape().str() + " vs " + qm_features.shape().str());
  }
  return ops::add(qf_features, qm_features);
}

template <typename T>
Tensor<T> hif_forward(const Tensor<T>& features, std::span<const QualityFactor> qfs,
                      std::span<const QuantizationMatrix> qms, const HifParams<T>& params, HifBranches branches) {
  if (branches.qf && branches.qm) return fuse(qf_branch(features, qfs, params), qm_branch(features, qms, params));
  if (branches.qf) return qf_branch(features, qfs, params);
  if (branches.qm) return qm_branch(features, qms, params);
  throw ConfigError("hif_forward: at least one branch must be enabled");
}

template <typename T>
HifHandle<T>::HifHandle(std::size_t host_channels, HifParams<T> params, std::optional<std::uint64_t> adapter_seed)
    : host_channels_(host_channels), params_(std::move(params)) {
  const std::size_t c = params_.channels();
  if (host_channels == c) return;
  if (!adapter_seed) {
    throw ConfigError("attach: host width " + std::to_string(host_channels) + " differs from filter width " +
                      std::to_string(c) + " and no adapter was requested");
  }
  Rng rng(*adapter_seed);
  project_in_ = Conv2d<T>::same(host_channels, c, 1, rng);
  project_out_ = Conv2d<T>::same(c, host_channels, 1, rng);
}

template <typename T>
Tensor<T> HifHandle<T>::operator()(const Tensor<T>& features, std::span<const QualityFactor> qfs,
                                   std::span<const QuantizationMatrix> qms) const {
  if (features.shape().rank() != 4 || features.dim(1) != host_channels_) {
    throw DimensionError("hif handle: expected " + std::to_string(host_channels_) + "-channel features, got " +
                         features.shape().str());
  }
  if (!project_in_) return hif_forward(features, qfs, qms, params_);
  return (*project_out_)(hif_forward((*project_in_)(features), qfs, qms, params_));
}

template <typename T>
void HifHandle<T>::collect(ParamSet<T>& set, const std::string& prefix) const {
  params_.collect(set, prefix);
  if (project_in_) {
    project_in_->collect(set, prefix + ".project_in");
    project_out_->collect(set, prefix + ".project_out");
  }
}

#define HPGN_INSTANTIATE_HIF(T)                                                                               \
  template QfCoefficients<T> qf_coefficients(std::span<const QualityFactor>, const HifParams<T>&);            \
  template Tensor<T> qf_branch(const Tensor<T>&, std::span<const QualityFactor>, const HifParams<T>&);        \
  template QmAttention<T> qm_attention(const Tensor<T>&, std::span<const QuantizationMatrix>,                 \
                                       const HifParams<T>&);                                                  \
  template Tensor<T> qm_branch(const Tensor<T>&, std::span<const QuantizationMatrix>, const HifParams<T>&);   \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&);                                                \
  template Tensor<T> hif_forward(const Tensor<T>&, std::span<const QualityFactor>,                            \
                                 std::span<const QuantizationMatrix>, const HifParams<T>&, HifBranches);      \
  template class HifHandle<T>;

HPGN_INSTANTIATE_HIF(float)
HPGN_INSTANTIATE_HIF(double)

#undef HPGN_INSTANTIATE_HIF

}  // namespace hpgn
