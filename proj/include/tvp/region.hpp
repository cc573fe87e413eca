#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>

#include "tvp/image.hpp"

namespace tvp {

enum class RegionKind { rect, ellipse, mask };

std::string_view to_string(RegionKind kind);
RegionKind region_kind_from_string(std::string_view name);

// Half-open pixel box [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const Box&) const = default;
};

// Mask backed by a file that is read on first access. Safe to share between threads.
class MaskSource {
 public:
  explicit MaskSource(Mask mask);
  explicit MaskSource(std::filesystem::path path);

  const Mask& get() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::once_flag once_;
  mutable std::optional<Mask> mask_;
};

struct RegionSpec {
  RegionKind kind = RegionKind::rect;
  Box box;                                  // rect / ellipse
  std::shared_ptr<const MaskSource> source;  // mask

  static RegionSpec rect(int x0, int y0, int x1, int y1);
  static RegionSpec ellipse(int x0, int y0, int x1, int y1);
  static RegionSpec full(int height, int width) { return rect(0, 0, width, height); }
  static RegionSpec from_mask(Mask mask);
  static RegionSpec from_mask_file(std::filesystem::path path);

  const Mask& mask() const;

  // Throws invalid_region / dimension_mismatch when the region does not fit the image.
  void validate(int height, int width) const;

  bool covers_full_image(int height, int width) const;

  friend bool operator==(const RegionSpec& a, const RegionSpec& b);
};

Mask rasterize_region(const RegionSpec& region, int height, int width);

// Pixel-centre test against the ellipse inscribed in the box.
bool inside_ellipse(const Box& box, int x, int y);

}  // namespace tvp
