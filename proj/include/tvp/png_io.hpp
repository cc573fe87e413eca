#pragma once

#include <filesystem>
#include <vector>

#include "tvp/image.hpp"

namespace tvp {

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// Single-channel 8-bit PNG helpers.
std::vector<std::uint8_t> read_gray_png(const std::filesystem::path& path, int& height, int& width);
void write_gray_png(const std::filesystem::path& path, int height, int width,
                    const std::vector<std::uint8_t>& gray);

// Masks are stored as 0 / 255 and thresholded at 128 on load.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace tvp
