#pragma once

// Image quality metrics and the line-oriented metrics report.
//
// Report format (UTF-8 text, '\n' line endings, fields separated by '\t'):
//   line 1: "# hpgn metrics report v1"
//   "meta"      seed=<u64>  config_hash=<16 hex digits>  qf_mode=<fixed:Q | random:LO:HI>  step=<u64>
//   "record"    path=<image path>  qf=<int>  psnr_db=<%.6f or inf>  ssim=<%.6f>   (one line per image)
//   "aggregate" count=<n>  mean_psnr_db=<%.6f or inf>  mean_ssim=<%.6f>          (last line)

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "hpgn/image.hpp"

namespace hpgn {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE) over all RGB samples; +inf when the images are identical.
double psnr(const Image8& a, const Image8& b);

/// BT.601 luma rounded to 8 bits, row-major.
std::vector<std::uint8_t> luminance(const Image8& image);

/// Single-scale SSIM on luminance: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 255, averaged over valid window positions. Needs H, W >= 11.
double ssim(const Image8& a, const Image8& b);

/// SSIM on already-converted 8-bit grayscale planes.
double ssim_gray(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, std::size_t width,
                 std::size_t height);

struct ImageMetrics {
  std::string path;
  int qf = 0;
  double psnr_db = 0;
  double ssim = 0;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string qf_mode;
  std::uint64_t step = 0;
  std::vector<ImageMetrics> records;

  double mean_psnr() const;
  double mean_ssim() const;
};

std::string format_report(const MetricsReport& report);
/// Throws IoError on malformed input.
MetricsReport parse_report(std::string_view text);
void write_report(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace hpgn
