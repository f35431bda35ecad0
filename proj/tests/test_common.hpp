#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gradcheck.hpp"
#include "hpgn/image.hpp"
#include "hpgn/layers.hpp"

namespace hpgn::testing {

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

template <typename T = double>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<T> data(shape.numel());
  for (auto& v : data) v = static_cast<T>(lo + (hi - lo) * uniform01(rng));
  return Tensor<T>::from(shape, std::move(data), requires_grad);
}

inline Image8 random_image(std::size_t w, std::size_t h, Rng& rng) {
  Image8 img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

using OpFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Gradient check of sum(f(inputs) * R) for a fixed random R.
inline GradCheckResult check_op(const OpFn& f, const std::vector<Tensor<double>>& inputs, Rng& rng,
                                std::size_t max_coords = 0) {
  Tensor<double> out;
  {
    NoGradGuard<double> guard;
    out = f(inputs);
  }
  const auto weights = random_tensor(out.shape(), rng);
  return gradcheck([&] { return ops::sum(ops::mul(f(inputs), weights)); }, inputs, 1e-3, max_coords);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace hpgn::testing
