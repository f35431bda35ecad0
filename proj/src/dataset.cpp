#include "hpgn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "hpgn/errors.hpp"

namespace hpgn {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::map<std::string, fs::path> list_images(const fs::path& dir, std::vector<std::string>& problems) {
  std::map<std::string, fs::path> files;
  if (!fs::is_directory(dir)) {
    problems.push_back("missing directory " + dir.string());
    return files;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.emplace(entry.path().filename().string(), entry.path());
  }
  if (files.empty()) problems.push_back("no images in " + dir.string());
  return files;
}

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

std::array<double, 3> random_color(Rng& rng) { return {uniform(rng, 20, 255), uniform(rng, 20, 255), uniform(rng, 20, 255)}; }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

Image8 flip_horizontal(const Image8& img) {
  Image8 out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
    }
  }
  return out;
}

}  // namespace

std::vector<ImagePair> ingest(const fs::path& root) {
  std::vector<std::string> problems;
  if (!fs::is_directory(root)) throw IngestError("dataset root " + root.string() + " is not a directory");
  const auto lows = list_images(root / "low", problems);
  const auto highs = list_images(root / "high", problems);
  for (const auto& [name, path] : lows) {
    if (!highs.count(name)) problems.push_back("unmatched " + path.string());
  }
  for (const auto& [name, path] : highs) {
    if (!lows.count(name)) problems.push_back("unmatched " + path.string());
  }
  std::vector<ImagePair> pairs;
  if (problems.empty()) {
    for (const auto& [name, low_path] : lows) {
      ImagePair p;
      p.low_path = low_path;
      p.high_path = highs.at(name);
      try {
        p.low = read_image(p.low_path);
        p.high = read_image(p.high_path);
      } catch (const Error& e) {
        problems.push_back(e.what());
        continue;
      }
      if (p.low.width != p.high.width || p.low.height != p.high.height) {
        problems.push_back("size mismatch for " + name + ": low " + std::to_string(p.low.width) + "x" +
                           std::to_string(p.low.height) + ", high " + std::to_string(p.high.width) + "x" +
                           std::to_string(p.high.height));
        continue;
      }
      pairs.push_back(std::move(p));
    }
  }
  if (!problems.empty()) {
    std::string msg = "cannot ingest " + root.string() + ":";
    for (const auto& p : problems) msg += "\n  " + p;
    throw IngestError(msg);
  }
  return pairs;
}

std::uint64_t draw_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("draw_below: empty range");
  const std::uint64_t limit = Rng::max() - (Rng::max() % n + 1) % n;
  while (true) {
    const std::uint64_t v = rng();
    if (v <= limit) return v % n;
  }
}

QualityFactor sample_qf(Rng& rng, const QfMode& mode) {
  mode.validate();
  if (mode.kind == QfMode::Kind::fixed) return QualityFactor(mode.qf);
  const auto span = static_cast<std::uint64_t>(mode.hi - mode.lo + 1);
  return QualityFactor(mode.lo + static_cast<int>(draw_below(rng, span)));
}

Example make_example(const ImagePair& pair, Rng& rng, const TrainConfig& config) {
  const std::size_t c = config.crop;
  if (c > pair.low.width || c > pair.low.height) {
    throw ConfigError("crop " + std::to_string(c) + " exceeds image " + pair.name() + " (" +
                      std::to_string(pair.low.width) + "x" + std::to_string(pair.low.height) + "); use a smaller crop");
  }
  Example ex;
  ex.qf = sample_qf(rng, config.qf_mode);
  ex.qm = qf_to_qm(ex.qf, ChannelKind::luma);
  ex.x0 = static_cast<std::size_t>(draw_below(rng, pair.low.width - c + 1));
  ex.y0 = static_cast<std::size_t>(draw_below(rng, pair.low.height - c + 1));
  if (config.flip) ex.flipped = draw_below(rng, 2) == 1;
  const auto compressed = compress_roundtrip(pair.low, ex.qf);
  ex.compressed = crop(compressed, ex.x0, ex.y0, c, c);
  ex.high = crop(pair.high, ex.x0, ex.y0, c, c);
  if (ex.flipped) {
    ex.compressed = flip_horizontal(ex.compressed);
    ex.high = flip_horizontal(ex.high);
  }
  return ex;
}

Batch make_batch(const std::vector<ImagePair>& data, std::size_t step, Rng& rng, const TrainConfig& config) {
  if (data.empty()) throw ContractError("make_batch: empty dataset");
  Batch batch;
  for (std::size_t b = 0; b < config.batch; ++b) {
    const auto& pair = data[(step * config.batch + b) % data.size()];
    batch.examples.push_back(make_example(pair, rng, config));
    batch.names.push_back(pair.name());
  }
  std::vector<const Image8*> comp, high;
  for (const auto& ex : batch.examples) {
    comp.push_back(&ex.compressed);
    high.push_back(&ex.high);
    batch.qfs.push_back(ex.qf);
    batch.qms.push_back(ex.qm);
  }
  batch.compressed = images_to_tensor<float>(comp);
  batch.high = images_to_tensor<float>(high);
  return batch;
}

Image8 synthetic_scene(std::size_t width, std::size_t height, Rng& rng) {
  std::vector<double> px(width * height * 3);
  const auto c0 = random_color(rng);
  const auto c1 = random_color(rng);
  const double angle = uniform(rng, 0, 6.283185307179586);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = 0.5 + 0.5 * ((x / double(width) - 0.5) * ca + (y / double(height) - 0.5) * sa);
      for (std::size_t c = 0; c < 3; ++c) px[(y * width + x) * 3 + c] = c0[c] + (c1[c] - c0[c]) * u;
    }
  }
  const std::size_t shapes = 6 + draw_below(rng, 5);
  for (std::size_t s = 0; s < shapes; ++s) {
    const auto color = random_color(rng);
    const bool disc = draw_below(rng, 2) == 1;
    const bool striped = draw_below(rng, 3) == 0;
    const double cx = uniform(rng, 0, width), cy = uniform(rng, 0, height);
    const double rx = uniform(rng, 4, width / 3.0), ry = uniform(rng, 4, height / 3.0);
    const double period = uniform(rng, 3, 9);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        const double shade = striped ? 0.65 + 0.35 * std::sin(6.283185307179586 * (x + y) / period) : 1.0;
        for (std::size_t c = 0; c < 3; ++c) px[(y * width + x) * 3 + c] = color[c] * shade;
      }
    }
  }
  Image8 img(width, height);
  for (std::size_t i = 0; i < px.size(); ++i) img.pixels[i] = to_byte(px[i]);
  return img;
}

Image8 synthetic_low_light(const Image8& high, Rng& rng) {
  const double gain = uniform(rng, 0.10, 0.22);
  const double gamma = uniform(rng, 1.1, 1.5);
  Image8 low(high.width, high.height);
  for (std::size_t i = 0; i < high.pixels.size(); ++i) {
    const double v = 255.0 * gain * std::pow(high.pixels[i] / 255.0, gamma);
    low.pixels[i] = to_byte(v + uniform(rng, -1.5, 1.5));
  }
  return low;
}

void write_desk_corpus(const fs::path& root, std::size_t count, std::size_t width, std::size_t height,
                       std::uint64_t seed) {
  fs::create_directories(root / "low");
  fs::create_directories(root / "high");
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto high = synthetic_scene(width, height, rng);
    const auto low = synthetic_low_light(high, rng);
    char name[32];
    std::snprintf(name, sizeof name, "%03zu.png", i);
    write_png(root / "high" / name, high);
    write_png(root / "low" / name, low);
  }
}

}  // namespace hpgn
