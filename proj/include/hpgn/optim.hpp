#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hpgn/layers.hpp"

namespace hpgn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a single parameter block, in place.
/// `step` is the 1-based step index.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 const AdamConfig& config, std::size_t step);

/// Adam over a ParamSet. Moment buffers are kept in the set's registration order.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& params, AdamConfig config);

  /// Applies one update using the gradients currently held by the parameters.
  /// Parameters that received no gradient are left untouched. Throws
  /// NumericError (before modifying anything) when a gradient is non-finite.
  void step(ParamSet<T>& params);

  std::size_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

  void restore(std::size_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace hpgn
