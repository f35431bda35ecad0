#include "hpgn/model.hpp"

namespace hpgn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::qf_only: return "qf";
    case Variant::qm_only: return "qm";
    case Variant::full: return "full";
  }
  return "full";
}

Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::baseline;
  if (name == "qf") return Variant::qf_only;
  if (name == "qm") return Variant::qm_only;
  if (name == "full") return Variant::full;
  throw ConfigError("unknown variant '" + name + "' (expected baseline, qf, qm or full)");
}

template <typename T>
HpgnModel<T> HpgnModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  HpgnModel m;
  m.config = config;
  const std::size_t c = config.enhancer.width;
  if (config.uses_filter()) {
    Rng estimator_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    Rng hif_rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
    m.estimator = IlluminationEstimator<T>::create(c, estimator_rng);
    m.hif = HifParams<T>::create(c, hif_rng);
  }
  Rng enhancer_rng(seed ^ 0x165667b19e3779f9ULL);
  m.enhancer = EnhancerParams<T>::create(config.enhancer, enhancer_rng);
  return m;
}

template <typename T>
ModelOutputs<T> HpgnModel<T>::forward(const Tensor<T>& compressed, std::span<const QualityFactor> qfs) const {
  std::vector<QuantizationMatrix> qms;
  qms.reserve(qfs.size());
  for (const auto qf : qfs) qms.push_back(qf_to_qm(qf, ChannelKind::luma));
  return forward(compressed, qfs, qms);
}

template <typename T>
ModelOutputs<T> HpgnModel<T>::forward(const Tensor<T>& compressed, std::span<const QualityFactor> qfs,
                                      std::span<const QuantizationMatrix> qms) const {
  ModelOutputs<T> out;
  if (!config.uses_filter()) {
    out.enhanced = enhance(compressed, Tensor<T>(), enhancer);
    return out;
  }
  const auto prior = illum_prior(compressed);
  auto illum = estimate(compressed, prior, *estimator);
  out.brightness = illum.brightness;
  out.features = illum.features;
  out.light_up = light_up(illum.brightness, compressed);
  out.filtered = hif_forward(illum.features, qfs, qms, *hif, config.branches());
  const auto& trunk = config.enhancer.trunk_input == TrunkInput::light_up ? out.light_up : compressed;
  out.enhanced = enhance(trunk, out.filtered, enhancer);
  return out;
}

template <typename T>
ParamSet<T> HpgnModel<T>::parameters() const {
  ParamSet<T> set;
  if (estimator) estimator->collect(set, "estimator");
  if (hif) {
    const auto b = config.branches();
    hif->collect(set, "hif", b.qf, b.qm);
  }
  enhancer.collect(set, "enhancer");
  return set;
}

template <typename T>
Image8 enhance_image(const HpgnModel<T>& model, const Image8& compressed, QualityFactor qf) {
  NoGradGuard<T> no_grad;
  const auto input = image_to_tensor<T>(compressed);
  const std::size_t h = compressed.height, w = compressed.width;
  const std::size_t pad_h = (4 - h % 4) % 4, pad_w = (4 - w % 4) % 4;
  const auto padded = (pad_h || pad_w) ? ops::reflect_pad(input, 0, pad_h, 0, pad_w) : input;
  const QualityFactor qfs[] = {qf};
  auto out = model.forward(padded, qfs).enhanced;
  if (pad_h || pad_w) out = ops::narrow(ops::narrow(out, 2, 0, h), 3, 0, w);
  return tensor_to_image(out);
}

template struct HpgnModel<float>;
template struct HpgnModel<double>;
template Image8 enhance_image(const HpgnModel<float>&, const Image8&, QualityFactor);
template Image8 enhance_image(const HpgnModel<double>&, const Image8&, QualityFactor);

}  // namespace hpgn
