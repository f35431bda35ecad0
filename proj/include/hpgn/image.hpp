#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hpgn/tensor.hpp"

namespace hpgn {

/// 8-bit RGB image, interleaved, row-major.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image8() = default;
  Image8(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Reads PNG (any bit depth/colour type, converted to 8-bit RGB) or baseline
/// JPEG files produced by external encoders. The format is sniffed from the
/// file signature.
Image8 read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG atomically (temporary file + rename).
void write_png(const std::filesystem::path& path, const Image8& image);

/// Crop [x0, x0+w) x [y0, y0+h).
Image8 crop(const Image8& image, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h);

/// Stacks images of identical size into an N x 3 x H x W tensor in [0, 1].
template <typename T>
Tensor<T> images_to_tensor(const std::vector<const Image8*>& images);

template <typename T>
Tensor<T> image_to_tensor(const Image8& image) {
  return images_to_tensor<T>({&image});
}

/// Sample `index` of an N x 3 x H x W tensor, clamped to [0,1] and rounded to 8 bits.
template <typename T>
Image8 tensor_to_image(const Tensor<T>& tensor, std::size_t index = 0);

}  // namespace hpgn
