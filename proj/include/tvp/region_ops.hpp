#pragma once

#include <string>
#include <vector>

#include "tvp/image.hpp"
#include "tvp/region.hpp"

namespace tvp {

inline constexpr Rgb kOutlineColor{0, 255, 0};
inline constexpr int kOutlineThickness = 2;

// Inner boundary band: region pixels within L-infinity distance `thickness` of a pixel outside
// the region (the image frame counts as outside).
Mask outline_band(const Mask& region, int thickness);

// Paints the outline band; every other pixel is copied unchanged.
Image draw_region_outline(const Image& img, const RegionSpec& region, Rgb color = kOutlineColor,
                          int thickness = kOutlineThickness);

// Nearest-neighbour resize of the region's bounding box, corner-aligned so the output corners
// sample the box corners. Masks use their tight bounding box.
Image crop_region(const Image& img, const RegionSpec& region, int out_h, int out_w);

// Fills the region interior with `fill`, then draws the outline so the location stays visible.
Image blank_region(const Image& img, const RegionSpec& region, Rgb fill,
                   Rgb outline = kOutlineColor, int thickness = kOutlineThickness);

// "region : x0 y0 x1 y1" with every number split into single-digit words, e.g. 34 -> "3 4".
std::vector<std::string> region_to_text(const RegionSpec& region);

// Every box whose encoding equals `words` and which fits a width x height image. Numbers never
// carry leading zeros, which keeps the candidate set small.
std::vector<Box> parse_region_text(const std::vector<std::string>& words, int width, int height);

RegionSpec mask_to_bbox(const Mask& mask);

Box region_bbox(const RegionSpec& region);

}  // namespace tvp
