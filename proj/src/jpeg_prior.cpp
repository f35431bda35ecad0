#include "hpgn/jpeg_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "hpgn/errors.hpp"

namespace hpgn {

namespace {

constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

// basis[u * 8 + x] = a(u) cos((2x + 1) u pi / 16)
const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> basis = [] {
    std::array<double, 64> b{};
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) b[u * 8 + x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();
  return basis;
}

struct Plane {
  std::size_t width, height;
  std::vector<double> values;
  double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
};

void quantize_plane(Plane& plane, const QuantizationMatrix& qm) {
  for (std::size_t by = 0; by < plane.height; by += 8) {
    for (std::size_t bx = 0; bx < plane.width; bx += 8) {
      Block8 block;
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) block[y * 8 + x] = plane.at(bx + x, by + y) - 128.0;
      }
      Block8 coeffs = dct8x8(block, DctDirection::forward);
      for (int i = 0; i < 64; ++i) {
        const double q = qm.entries[i];
        coeffs[i] = std::round(coeffs[i] / q) * q;
      }
      const Block8 restored = dct8x8(coeffs, DctDirection::inverse);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) plane.at(bx + x, by + y) = restored[y * 8 + x] + 128.0;
      }
    }
  }
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

QualityFactor::QualityFactor(int value) : value_(value) {
  if (value < 1 || value > 100) {
    throw ConfigError("quality factor must be in [1, 100], got " + std::to_string(value));
  }
}

const std::array<int, 64>& base_table(ChannelKind kind) {
  return kind == ChannelKind::luma ? kLumaBase : kChromaBase;
}

int qf_to_scale(QualityFactor qf) {
  const int q = qf.value();
  return q < 50 ? 5000 / q : 200 - 2 * q;
}

QuantizationMatrix qf_to_qm(QualityFactor qf, ChannelKind kind) {
  const long scale = qf_to_scale(qf);
  QuantizationMatrix qm;
  qm.kind = kind;
  const auto& base = base_table(kind);
  for (std::size_t i = 0; i < 64; ++i) {
    const long v = (base[i] * scale + 50) / 100;
    qm.entries[i] = static_cast<int>(std::clamp(v, 1L, 255L));
  }
  return qm;
}

std::array<double, 64> qm_to_feature_vector(const QuantizationMatrix& qm) {
  std::array<double, 64> v{};
  for (std::size_t i = 0; i < 64; ++i) v[i] = qm.entries[i] / 255.0;
  return v;
}

Block8 dct8x8(const Block8& block, DctDirection direction) {
  for (const double v : block) {
    if (!std::isfinite(v)) throw NumericError("dct8x8: non-finite input");
  }
  const auto& c = dct_basis();
  Block8 tmp{}, out{};
  if (direction == DctDirection::forward) {
    // tmp = C X, out = tmp C^T
    for (int u = 0; u < 8; ++u) {
      for (int x = 0; x < 8; ++x) {
        double acc = 0;
        for (int y = 0; y < 8; ++y) acc += c[u * 8 + y] * block[y * 8 + x];
        tmp[u * 8 + x] = acc;
      }
    }
    for (int u = 0; u < 8; ++u) {
      for (int v = 0; v < 8; ++v) {
        double acc = 0;
        for (int x = 0; x < 8; ++x) acc += tmp[u * 8 + x] * c[v * 8 + x];
        out[u * 8 + v] = acc;
      }
    }
  } else {
    // tmp = C^T F, out = tmp C
    for (int y = 0; y < 8; ++y) {
      for (int v = 0; v < 8; ++v) {
        double acc = 0;
        for (int u = 0; u < 8; ++u) acc += c[u * 8 + y] * block[u * 8 + v];
        tmp[y * 8 + v] = acc;
      }
    }
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        double acc = 0;
        for (int v = 0; v < 8; ++v) acc += tmp[y * 8 + v] * c[v * 8 + x];
        out[y * 8 + x] = acc;
      }
    }
  }
  return out;
}

Image8 compress_roundtrip(const Image8& image, QualityFactor qf) {
  if (image.width < 8 || image.height < 8) {
    throw DimensionError("compress_roundtrip: image must be at least 8x8, got " + std::to_string(image.width) + "x" +
                         std::to_string(image.height));
  }
  const std::size_t pw = (image.width + 7) / 8 * 8, ph = (image.height + 7) / 8 * 8;
  Plane y{pw, ph, std::vector<double>(pw * ph)};
  Plane cb = y, cr = y;
  for (std::size_t py = 0; py < ph; ++py) {
    const std::size_t sy = std::min(py, image.height - 1);
    for (std::size_t px = 0; px < pw; ++px) {
      const std::size_t sx = std::min(px, image.width - 1);
      const double r = image.at(sx, sy, 0), g = image.at(sx, sy, 1), b = image.at(sx, sy, 2);
      y.at(px, py) = 0.299 * r + 0.587 * g + 0.114 * b;
      cb.at(px, py) = -0.1687 * r - 0.3313 * g + 0.5 * b + 128.0;
      cr.at(px, py) = 0.5 * r - 0.4187 * g - 0.0813 * b + 128.0;
    }
  }
  quantize_plane(y, qf_to_qm(qf, ChannelKind::luma));
  const auto chroma = qf_to_qm(qf, ChannelKind::chroma);
  quantize_plane(cb, chroma);
  quantize_plane(cr, chroma);

  Image8 out(image.width, image.height);
  for (std::size_t py = 0; py < image.height; ++py) {
    for (std::size_t px = 0; px < image.width; ++px) {
      const double l = y.at(px, py), u = cb.at(px, py) - 128.0, v = cr.at(px, py) - 128.0;
      out.at(px, py, 0) = to_u8(l + 1.402 * v);
      out.at(px, py, 1) = to_u8(l - 0.3441 * u - 0.7141 * v);
      out.at(px, py, 2) = to_u8(l + 1.772 * u);
    }
  }
  return out;
}

std::string format_qm_grid(const QuantizationMatrix& qm) {
  std::ostringstream os;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      if (c) os << ' ';
      std::string cell = std::to_string(qm.at(r, c));
      os << std::string(3 - std::min<std::size_t>(3, cell.size()), ' ') << cell;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace hpgn
