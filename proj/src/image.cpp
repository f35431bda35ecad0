#include "hpgn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <string>

// jpeglib.h needs FILE/size_t declared first.
#include <jpeglib.h>

#include "hpgn/errors.hpp"
#include "hpgn/io_util.hpp"

namespace hpgn {

namespace {

Image8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG '" + name + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image8 out(img.width, img.height);
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG '" + name + "': " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Image8 decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Image8 out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("cannot decode JPEG '" + name + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = Image8(cinfo.output_width, cinfo.output_height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(kPngSig, kPngSig + 8, bytes.begin())) return decode_png(bytes, path.string());
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg(bytes, path.string());
  }
  throw IoError("'" + path.string() + "' is neither a PNG nor a JPEG file");
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.pixels.size() != image.width * image.height * 3 || image.width == 0 || image.height == 0) {
    throw DimensionError("write_png: malformed image buffer");
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG: " + std::string(img.message));
  }
  std::string buffer(size, '\0');
  if (!png_image_write_to_memory(&img, buffer.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG: " + std::string(img.message));
  }
  buffer.resize(size);
  write_file_atomic(path, buffer);
}

Image8 crop(const Image8& image, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (x0 + w > image.width || y0 + h > image.height) {
    throw DimensionError("crop window exceeds " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         " image");
  }
  Image8 out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const auto* src = image.pixels.data() + ((y0 + y) * image.width + x0) * 3;
    std::copy_n(src, w * 3, out.pixels.data() + y * w * 3);
  }
  return out;
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<const Image8*>& images) {
  if (images.empty()) throw DimensionError("images_to_tensor: no images");
  const std::size_t w = images.front()->width, h = images.front()->height;
  const std::size_t hw = w * h;
  std::vector<T> data(images.size() * 3 * hw);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image8& img = *images[n];
    if (img.width != w || img.height != h) throw DimensionError("images_to_tensor: images differ in size");
    for (std::size_t i = 0; i < hw; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        data[(n * 3 + c) * hw + i] = static_cast<T>(img.pixels[i * 3 + c]) / T(255);
      }
    }
  }
  return Tensor<T>::from(Shape{images.size(), 3, h, w}, std::move(data));
}

template <typename T>
Image8 tensor_to_image(const Tensor<T>& tensor, std::size_t index) {
  const auto& s = tensor.shape();
  if (s.rank() != 4 || s[1] != 3 || index >= s[0]) {
    throw DimensionError("tensor_to_image: expected N x 3 x H x W tensor, got " + s.str());
  }
  const std::size_t h = s[2], w = s[3], hw = h * w;
  Image8 out(w, h);
  const auto data = tensor.data();
  for (std::size_t i = 0; i < hw; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(data[(index * 3 + c) * hw + i]), 0.0, 1.0);
      out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return out;
}

template Tensor<float> images_to_tensor<float>(const std::vector<const Image8*>&);
template Tensor<double> images_to_tensor<double>(const std::vector<const Image8*>&);
template Image8 tensor_to_image<float>(const Tensor<float>&, std::size_t);
template Image8 tensor_to_image<double>(const Tensor<double>&, std::size_t);

}  // namespace hpgn
