#pragma once

// Compression priors: quality factor, quantization matrices, and a simulated
// JPEG round trip (colour transform, 8x8 DCT, quantize/dequantize) that
// reproduces the quantization distortion of baseline JPEG without the entropy
// coder.

#include <array>
#include <cstdint>
#include <string>

#include "hpgn/image.hpp"

namespace hpgn {

/// JPEG quality factor in [1, 100].
class QualityFactor {
 public:
  /// Throws ConfigError when value is outside [1, 100].
  explicit QualityFactor(int value);
  int value() const { return value_; }
  friend bool operator==(QualityFactor, QualityFactor) = default;

 private:
  int value_;
};

enum class ChannelKind { luma, chroma };

struct QuantizationMatrix {
  std::array<int, 64> entries{};  // row-major, natural (not zig-zag) order
  ChannelKind kind = ChannelKind::luma;

  int at(int row, int col) const { return entries[static_cast<std::size_t>(row * 8 + col)]; }
  friend bool operator==(const QuantizationMatrix&, const QuantizationMatrix&) = default;
};

/// Standard luminance / chrominance base tables (natural order).
const std::array<int, 64>& base_table(ChannelKind kind);

/// IJG scaling percentage: 5000/qf below 50, 200 - 2qf otherwise.
int qf_to_scale(QualityFactor qf);

/// entry = clamp(floor((base * scale + 50) / 100), 1, 255).
QuantizationMatrix qf_to_qm(QualityFactor qf, ChannelKind kind);

/// Row-major entries divided by 255.
std::array<double, 64> qm_to_feature_vector(const QuantizationMatrix& qm);

using Block8 = std::array<double, 64>;

enum class DctDirection { forward, inverse };

/// Orthonormal 8x8 DCT-II (forward) / DCT-III (inverse). A constant block of
/// value c maps to DC = 8c. Throws NumericError on non-finite input.
Block8 dct8x8(const Block8& block, DctDirection direction);

/// Simulated baseline JPEG: BT.601 full-range YCbCr 4:4:4, edge-replicated
/// padding to multiples of 8, level shift, DCT, quantize with
/// round-half-away-from-zero, dequantize, inverse DCT, crop, back to RGB with
/// clamping. Throws DimensionError for images smaller than 8x8.
Image8 compress_roundtrip(const Image8& image, QualityFactor qf);

/// Guesses the QF an image was last compressed with: re-compresses at
/// 10, 20, ..., 100 and returns the lowest QF whose mean absolute residual is
/// within a small margin of the smallest residual seen.
QualityFactor estimate_qf(const Image8& image);

/// Multi-line rendering of a table: 8 rows of 8 integers.
std::string format_qm_grid(const QuantizationMatrix& qm);

}  // namespace hpgn
