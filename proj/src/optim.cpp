#include "hpgn/optim.hpp"

#include <cmath>
#include <string>

namespace hpgn {

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 const AdamConfig& config, std::size_t step) {
  if (step == 0) throw ContractError("adam step index starts at 1");
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw DimensionError("adam: parameter, gradient and moment sizes differ");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = config.beta1 * static_cast<double>(m[i]) + (1.0 - config.beta1) * g;
    const double vi = config.beta2 * static_cast<double>(v[i]) + (1.0 - config.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double update = config.lr * (mi / c1) / (std::sqrt(vi / c2) + config.eps);
    param[i] = static_cast<T>(static_cast<double>(param[i]) - update);
  }
}

template <typename T>
Adam<T>::Adam(const ParamSet<T>& params, AdamConfig config) : config_(config) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.tensor.numel(), T(0));
    v_.emplace_back(e.tensor.numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step(ParamSet<T>& params) {
  const auto& entries = params.entries();
  if (entries.size() != m_.size()) throw ContractError("adam: parameter set changed since construction");
  for (const auto& e : entries) {
    for (const T g : e.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in parameter block '" + e.name + "'");
    }
  }
  ++step_;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Tensor<T> t = entries[k].tensor;
    if (!t.has_grad()) continue;
    adam_update<T>(t.mutable_data(), t.grad(), m_[k], v_[k], config_, step_);
  }
}

template <typename T>
void Adam<T>::restore(std::size_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ContractError("adam: moment block count mismatch");
  for (std::size_t k = 0; k < m_.size(); ++k) {
    if (m[k].size() != m_[k].size() || v[k].size() != v_[k].size()) {
      throw DimensionError("adam: moment block " + std::to_string(k) + " has the wrong size");
    }
  }
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 const AdamConfig&, std::size_t);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, const AdamConfig&, std::size_t);
template class Adam<float>;
template class Adam<double>;

}  // namespace hpgn
