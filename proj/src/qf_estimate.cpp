#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "hpgn/jpeg_prior.hpp"

namespace hpgn {

namespace {

double mean_abs_residual(const Image8& a, const Image8& b) {
  double total = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) total += std::abs(int(a.pixels[i]) - int(b.pixels[i]));
  return total / static_cast<double>(a.pixels.size());
}

}  // namespace

QualityFactor estimate_qf(const Image8& image) {
  std::array<double, 10> residual{};
  for (int i = 0; i < 10; ++i) residual[i] = mean_abs_residual(image, compress_roundtrip(image, QualityFactor(10 * (i + 1))));
  const double best = *std::min_element(residual.begin(), residual.end());
  // Re-compressing at or above the original QF is nearly idempotent, so the
  // residual curve flattens there; the margin absorbs colour rounding noise.
  const double margin = 0.25 * best + 0.05;
  for (int i = 0; i < 10; ++i) {
    if (residual[i] <= best + margin) return QualityFactor(10 * (i + 1));
  }
  return QualityFactor(100);
}

}  // namespace hpgn
