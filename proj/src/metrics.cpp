#include "hpgn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hpgn/errors.hpp"
#include "hpgn/io_util.hpp"

namespace hpgn {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double total = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-(d * d) / (2 * kSigma * kSigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Valid-mode separable filtering of a w x h plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::array<double, kWindow>& g) {
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(ow * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * src[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(ow * oh);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double parse_metric(const std::string& s) {
  if (s == "inf") return kPsnrIdentical;
  if (s == "-inf") return -kPsnrIdentical;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("metrics report: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    parts.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string field(const std::string& part, const std::string& key) {
  if (part.rfind(key + "=", 0) != 0) throw IoError("metrics report: expected field '" + key + "', got '" + part + "'");
  return part.substr(key.size() + 1);
}

}  // namespace

double psnr(const Image8& a, const Image8& b) {
  if (a.width != b.width || a.height != b.height) throw DimensionError("psnr: images differ in size");
  if (a.pixels.empty()) throw DimensionError("psnr: empty image");
  double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    se += d * d;
  }
  if (se == 0) return kPsnrIdentical;
  const double mse = se / static_cast<double>(a.pixels.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

std::vector<std::uint8_t> luminance(const Image8& image) {
  std::vector<std::uint8_t> y(image.width * image.height);
  for (std::size_t i = 0; i < y.size(); ++i) {
    // Integer weights keep ties exact regardless of FMA contraction.
    const unsigned v = 299u * image.pixels[i * 3] + 587u * image.pixels[i * 3 + 1] + 114u * image.pixels[i * 3 + 2];
    y[i] = static_cast<std::uint8_t>((v + 500u) / 1000u);
  }
  return y;
}

double ssim_gray(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, std::size_t width,
                 std::size_t height) {
  if (a.size() != width * height || b.size() != a.size()) throw DimensionError("ssim: plane sizes differ");
  if (width < kWindow || height < kWindow) {
    throw DimensionError("ssim: image must be at least 11x11, got " + std::to_string(width) + "x" +
                         std::to_string(height));
  }
  const auto g = gaussian_taps();
  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i];
    y[i] = b[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, width, height, g);
  const auto my = filter_valid(y, width, height, g);
  const auto exx = filter_valid(xx, width, height, g);
  const auto eyy = filter_valid(yy, width, height, g);
  const auto exy = filter_valid(xy, width, height, g);
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double sx = exx[i] - mx[i] * mx[i];
    const double sy = eyy[i] - my[i] * my[i];
    const double sxy = exy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * sxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (sx + sy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double ssim(const Image8& a, const Image8& b) {
  if (a.width != b.width || a.height != b.height) throw DimensionError("ssim: images differ in size");
  return ssim_gray(luminance(a), luminance(b), a.width, a.height);
}

double MetricsReport::mean_psnr() const {
  if (records.empty()) return 0;
  double total = 0;
  for (const auto& r : records) total += r.psnr_db;
  return total / static_cast<double>(records.size());
}

double MetricsReport::mean_ssim() const {
  if (records.empty()) return 0;
  double total = 0;
  for (const auto& r : records) total += r.ssim;
  return total / static_cast<double>(records.size());
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream os;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(report.config_hash));
  os << "# hpgn metrics report v1\n";
  os << "meta\tseed=" << report.seed << "\tconfig_hash=" << hash << "\tqf_mode=" << report.qf_mode
     << "\tstep=" << report.step << '\n';
  for (const auto& r : report.records) {
    if (r.path.find_first_of("\t\n") != std::string::npos) {
      throw IoError("metrics report: path contains a tab or newline: " + r.path);
    }
    os << "record\tpath=" << r.path << "\tqf=" << r.qf << "\tpsnr_db=" << fmt_metric(r.psnr_db)
       << "\tssim=" << fmt_metric(r.ssim) << '\n';
  }
  os << "aggregate\tcount=" << report.records.size() << "\tmean_psnr_db=" << fmt_metric(report.mean_psnr())
     << "\tmean_ssim=" << fmt_metric(report.mean_ssim()) << '\n';
  return os.str();
}

MetricsReport parse_report(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != "# hpgn metrics report v1") {
    throw IoError("metrics report: missing or unknown header");
  }
  MetricsReport report;
  bool saw_meta = false, saw_aggregate = false;
  std::size_t declared = 0;
  try {
    while (std::getline(is, line)) {
      if (saw_aggregate) throw IoError("metrics report: content after aggregate line");
      const auto parts = split_tabs(line);
      if (parts[0] == "meta" && parts.size() == 5) {
        report.seed = std::stoull(field(parts[1], "seed"));
        report.config_hash = std::stoull(field(parts[2], "config_hash"), nullptr, 16);
        report.qf_mode = field(parts[3], "qf_mode");
        report.step = std::stoull(field(parts[4], "step"));
        saw_meta = true;
      } else if (parts[0] == "record" && parts.size() == 5) {
        ImageMetrics m;
        m.path = field(parts[1], "path");
        m.qf = std::stoi(field(parts[2], "qf"));
        m.psnr_db = parse_metric(field(parts[3], "psnr_db"));
        m.ssim = parse_metric(field(parts[4], "ssim"));
        report.records.push_back(std::move(m));
      } else if (parts[0] == "aggregate" && parts.size() == 4) {
        declared = std::stoull(field(parts[1], "count"));
        saw_aggregate = true;
      } else {
        throw IoError("metrics report: unrecognized line '" + line + "'");
      }
    }
  } catch (const std::logic_error&) {
    throw IoError("metrics report: malformed number in line '" + line + "'");
  }
  if (!saw_meta || !saw_aggregate || declared != report.records.size()) {
    throw IoError("metrics report: incomplete or inconsistent report");
  }
  return report;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  write_file_atomic(path, format_report(report));
}

}  // namespace hpgn
