#pragma once

// Paired low/high image datasets, QF sampling and training example assembly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hpgn/config.hpp"
#include "hpgn/image.hpp"
#include "hpgn/jpeg_prior.hpp"

namespace hpgn {

struct ImagePair {
  std::filesystem::path low_path;
  std::filesystem::path high_path;
  Image8 low;
  Image8 high;

  std::string name() const { return low_path.filename().string(); }
};

/// Reads `root/low` and `root/high`, pairing files by name (PNG or JPEG) and
/// sorting by name. Throws IngestError listing every offender.
std::vector<ImagePair> ingest(const std::filesystem::path& root);

/// Unbiased integer in [0, n) by rejection; independent of the standard
/// library's distribution implementations.
std::uint64_t draw_below(Rng& rng, std::uint64_t n);

QualityFactor sample_qf(Rng& rng, const QfMode& mode);

struct Example {
  Image8 compressed;  // compressed low crop
  Image8 high;        // aligned ground-truth crop
  QualityFactor qf{80};
  QuantizationMatrix qm;
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  bool flipped = false;
};

/// Draw order: QF, x offset, y offset, then the flip bit when flipping is enabled.
Example make_example(const ImagePair& pair, Rng& rng, const TrainConfig& config);

struct Batch {
  std::vector<Example> examples;
  std::vector<std::string> names;
  Tensor<float> compressed;  // N x 3 x crop x crop in [0, 1]
  Tensor<float> high;
  std::vector<QualityFactor> qfs;
  std::vector<QuantizationMatrix> qms;
};

/// Sample b of step s uses pair (s * batch + b) mod |data|.
Batch make_batch(const std::vector<ImagePair>& data, std::size_t step, Rng& rng, const TrainConfig& config);

/// Procedural scene: gradient background, flat and striped shapes, discs.
Image8 synthetic_scene(std::size_t width, std::size_t height, Rng& rng);
/// Dim, gamma-darkened and lightly noisy version of `high`.
Image8 synthetic_low_light(const Image8& high, Rng& rng);

/// Writes `count` pairs as root/low/NNN.png and root/high/NNN.png.
void write_desk_corpus(const std::filesystem::path& root, std::size_t count, std::size_t width, std::size_t height,
                       std::uint64_t seed);

}  // namespace hpgn
