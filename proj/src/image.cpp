#include "tvp/image.hpp"

#include <numeric>

namespace tvp {

Image::Image(int h, int w, Rgb fill) : height(h), width(w) {
  pixels.resize(static_cast<std::size_t>(h) * w * channels);
  for (std::size_t i = 0; i < pixels.size(); i += channels) {
    pixels[i] = fill[0];
    pixels[i + 1] = fill[1];
    pixels[i + 2] = fill[2];
  }
}

Rgb Image::pixel(int y, int x) const {
  return {at(y, x, 0), at(y, x, 1), at(y, x, 2)};
}

void Image::set_pixel(int y, int x, Rgb rgb) {
  at(y, x, 0) = rgb[0];
  at(y, x, 1) = rgb[1];
  at(y, x, 2) = rgb[2];
}

long Mask::sum() const {
  return std::accumulate(bits.begin(), bits.end(), 0L);
}

}  // namespace tvp
