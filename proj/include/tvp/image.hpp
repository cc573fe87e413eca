#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace tvp {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved RGB, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  static constexpr int channels = 3;

  Image() = default;
  Image(int h, int w, Rgb fill = {0, 0, 0});

  std::uint8_t& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[index(y, x, c)]; }
  Rgb pixel(int y, int x) const;
  void set_pixel(int y, int x, Rgb rgb);

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
};

// Binary grid, values in {0,1}.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  long sum() const;

  bool operator==(const Mask&) const = default;
};

}  // namespace tvp
