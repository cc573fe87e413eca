#include "tvp/region.hpp"

#include "tvp/error.hpp"
#include "tvp/png_io.hpp"

namespace tvp {

std::string_view to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::rect: return "rect";
    case RegionKind::ellipse: return "ellipse";
    case RegionKind::mask: return "mask";
  }
  return "rect";
}

RegionKind region_kind_from_string(std::string_view name) {
  if (name == "rect") return RegionKind::rect;
  if (name == "ellipse") return RegionKind::ellipse;
  if (name == "mask") return RegionKind::mask;
  throw Error(ErrorCode::invalid_region, "unknown region kind '" + std::string(name) + "'");
}

MaskSource::MaskSource(Mask mask) : mask_(std::move(mask)) {
  std::call_once(once_, [] {});
}

MaskSource::MaskSource(std::filesystem::path path) : path_(std::move(path)) {}

const Mask& MaskSource::get() const {
  std::call_once(once_, [this] { mask_ = read_mask_png(path_); });
  return *mask_;
}

RegionSpec RegionSpec::rect(int x0, int y0, int x1, int y1) {
  return {RegionKind::rect, {x0, y0, x1, y1}, nullptr};
}

RegionSpec RegionSpec::ellipse(int x0, int y0, int x1, int y1) {
  return {RegionKind::ellipse, {x0, y0, x1, y1}, nullptr};
}

RegionSpec RegionSpec::from_mask(Mask mask) {
  return {RegionKind::mask, {}, std::make_shared<MaskSource>(std::move(mask))};
}

RegionSpec RegionSpec::from_mask_file(std::filesystem::path path) {
  return {RegionKind::mask, {}, std::make_shared<MaskSource>(std::move(path))};
}

const Mask& RegionSpec::mask() const {
  if (kind != RegionKind::mask || !source) {
    throw Error(ErrorCode::invalid_region, "region has no mask payload");
  }
  return source->get();
}

void RegionSpec::validate(int height, int width) const {
  if (kind == RegionKind::mask) {
    const Mask& m = mask();
    if (m.height != height || m.width != width) {
      throw Error(ErrorCode::dimension_mismatch,
                  "mask is " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                      ", image is " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (m.sum() == 0) throw Error(ErrorCode::empty_mask, "mask region has no pixels");
    return;
  }
  if (!(0 <= box.x0 && box.x0 < box.x1 && box.x1 <= width && 0 <= box.y0 && box.y0 < box.y1 &&
        box.y1 <= height)) {
    throw Error(ErrorCode::invalid_region,
                "box (" + std::to_string(box.x0) + "," + std::to_string(box.y0) + "," +
                    std::to_string(box.x1) + "," + std::to_string(box.y1) + ") outside " +
                    std::to_string(width) + "x" + std::to_string(height) + " image");
  }
}

bool RegionSpec::covers_full_image(int height, int width) const {
  if (kind == RegionKind::mask) return mask().sum() == static_cast<long>(height) * width;
  return kind == RegionKind::rect && box == Box{0, 0, width, height};
}

bool operator==(const RegionSpec& a, const RegionSpec& b) {
  if (a.kind != b.kind) return false;
  if (a.kind != RegionKind::mask) return a.box == b.box;
  if (!a.source || !b.source) return a.source == b.source;
  if (!a.source->path().empty() || !b.source->path().empty()) {
    return a.source->path() == b.source->path();
  }
  return a.source->get() == b.source->get();
}

bool inside_ellipse(const Box& box, int x, int y) {
  const double cx = 0.5 * (box.x0 + box.x1);
  const double cy = 0.5 * (box.y0 + box.y1);
  const double rx = 0.5 * box.width();
  const double ry = 0.5 * box.height();
  const double dx = (x + 0.5 - cx) / rx;
  const double dy = (y + 0.5 - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

Mask rasterize_region(const RegionSpec& region, int height, int width) {
  region.validate(height, width);
  if (region.kind == RegionKind::mask) return region.mask();
  Mask out(height, width);
  const Box& b = region.box;
  for (int y = b.y0; y < b.y1; ++y) {
    for (int x = b.x0; x < b.x1; ++x) {
      if (region.kind == RegionKind::rect || inside_ellipse(b, x, y)) out.at(y, x) = 1;
    }
  }
  return out;
}

}  // namespace tvp
