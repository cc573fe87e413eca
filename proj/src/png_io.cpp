#include "tvp/png_io.hpp"

#include <png.h>

#include <cstring>

#include "tvp/error.hpp"

namespace tvp {
namespace {

std::vector<std::uint8_t> read_with_format(const std::filesystem::path& path, png_uint_32 format,
                                           int& height, int& width) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::missing_file, path.string());
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorCode::io_error, "cannot decode " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::io_error, "cannot decode " + path.string() + ": " + img.message);
  }
  height = static_cast<int>(img.height);
  width = static_cast<int>(img.width);
  return buffer;
}

void write_with_format(const std::filesystem::path& path, png_uint_32 format, int height, int width,
                       const std::uint8_t* data) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    throw Error(ErrorCode::io_error, "cannot write " + path.string() + ": " + img.message);
  }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  Image out;
  out.pixels = read_with_format(path, PNG_FORMAT_RGB, out.height, out.width);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_with_format(path, PNG_FORMAT_RGB, image.height, image.width, image.pixels.data());
}

std::vector<std::uint8_t> read_gray_png(const std::filesystem::path& path, int& height, int& width) {
  return read_with_format(path, PNG_FORMAT_GRAY, height, width);
}

void write_gray_png(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& gray) {
  write_with_format(path, PNG_FORMAT_GRAY, height, width, gray.data());
}

Mask read_mask_png(const std::filesystem::path& path) {
  Mask m;
  auto gray = read_gray_png(path, m.height, m.width);
  m.bits.resize(gray.size());
  for (std::size_t i = 0; i < gray.size(); ++i) m.bits[i] = gray[i] >= 128 ? 1 : 0;
  return m;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> gray(mask.bits.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
  write_gray_png(path, mask.height, mask.width, gray);
}

}  // namespace tvp
