#include "tvp/region_ops.hpp"

#include <algorithm>

#include "tvp/error.hpp"

namespace tvp {

Mask outline_band(const Mask& region, int thickness) {
  Mask band(region.height, region.width);
  for (int y = 0; y < region.height; ++y) {
    for (int x = 0; x < region.width; ++x) {
      if (!region.at(y, x)) continue;
      bool near_outside = false;
      for (int dy = -thickness; dy <= thickness && !near_outside; ++dy) {
        for (int dx = -thickness; dx <= thickness; ++dx) {
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= region.height || xx >= region.width ||
              !region.at(yy, xx)) {
            near_outside = true;
            break;
          }
        }
      }
      band.at(y, x) = near_outside ? 1 : 0;
    }
  }
  return band;
}

Image draw_region_outline(const Image& img, const RegionSpec& region, Rgb color, int thickness) {
  const Mask band = outline_band(rasterize_region(region, img.height, img.width), thickness);
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (band.at(y, x)) out.set_pixel(y, x, color);
    }
  }
  return out;
}

Box region_bbox(const RegionSpec& region) {
  if (region.kind == RegionKind::mask) return mask_to_bbox(region.mask()).box;
  return region.box;
}

Image crop_region(const Image& img, const RegionSpec& region, int out_h, int out_w) {
  region.validate(img.height, img.width);
  const Box b = region_bbox(region);
  const int bw = b.width();
  const int bh = b.height();
  // Corner-aligned nearest neighbour: output corners land on the box corners.
  auto source = [](int o, int out, int origin, int extent) {
    if (out == 1) return origin;
    return origin + static_cast<int>((2L * o * (extent - 1) + (out - 1)) / (2L * (out - 1)));
  };
  Image out(out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    const int sy = source(oy, out_h, b.y0, bh);
    for (int ox = 0; ox < out_w; ++ox) {
      out.set_pixel(oy, ox, img.pixel(sy, source(ox, out_w, b.x0, bw)));
    }
  }
  return out;
}

Image blank_region(const Image& img, const RegionSpec& region, Rgb fill, Rgb outline,
                   int thickness) {
  const Mask mask = rasterize_region(region, img.height, img.width);
  const Mask band = outline_band(mask, thickness);
  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (band.at(y, x)) {
        out.set_pixel(y, x, outline);
      } else if (mask.at(y, x)) {
        out.set_pixel(y, x, fill);
      }
    }
  }
  return out;
}

std::vector<std::string> region_to_text(const RegionSpec& region) {
  if (region.kind == RegionKind::mask) {
    throw Error(ErrorCode::invalid_region, "convert mask regions with mask_to_bbox first");
  }
  std::vector<std::string> words{"region", ":"};
  for (int v : {region.box.x0, region.box.y0, region.box.x1, region.box.y1}) {
    for (char d : std::to_string(v)) words.emplace_back(1, d);
  }
  return words;
}

std::vector<Box> parse_region_text(const std::vector<std::string>& words, int width, int height) {
  if (words.size() < 6 || words[0] != "region" || words[1] != ":") {
    throw Error(ErrorCode::invalid_region, "region text must start with 'region :'");
  }
  std::string digits;
  for (std::size_t i = 2; i < words.size(); ++i) {
    if (words[i].size() != 1 || words[i][0] < '0' || words[i][0] > '9') {
      throw Error(ErrorCode::invalid_region, "unexpected region token '" + words[i] + "'");
    }
    digits += words[i];
  }
  std::vector<Box> out;
  const int n = static_cast<int>(digits.size());
  auto number = [&](int from, int to, int& value) {
    if (to - from > 1 && digits[from] == '0') return false;
    if (to - from > 9) return false;
    value = std::stoi(digits.substr(from, to - from));
    return true;
  };
  for (int a = 1; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int c = b + 1; c < n; ++c) {
        Box box;
        if (!number(0, a, box.x0) || !number(a, b, box.y0) || !number(b, c, box.x1) ||
            !number(c, n, box.y1)) {
          continue;
        }
        if (box.x0 < box.x1 && box.x1 <= width && box.y0 < box.y1 && box.y1 <= height) {
          out.push_back(box);
        }
      }
    }
  }
  return out;
}

RegionSpec mask_to_bbox(const Mask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw Error(ErrorCode::empty_mask, "cannot take the bounding box of an empty mask");
  return RegionSpec::rect(x0, y0, x1 + 1, y1 + 1);
}

}  // namespace tvp
