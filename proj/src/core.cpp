#include "bgz/core.hpp"

#include <cstdint>

#include <algorithm>
#include <charconv>

#include "bgz/error.hpp"

namespace bgz {

std::string_view to_string(GazeClass c) {
  switch (c) {
    case GazeClass::None:
      return "none";
    case GazeClass::Medium:
      return "medium";
    case GazeClass::Long:
      return "long";
  }
  return "?";
}

GazeClass gaze_class_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw ValidationError("gaze class index out of range: " + std::to_string(index));
  }
  return static_cast<GazeClass>(index);
}

std::optional<GazeClass> parse_gaze_class(std::string_view text) {
  for (GazeClass c : kAllClasses) {
    if (text == to_string(c)) return c;
  }
  int v = -1;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || v < 0 || v >= kNumClasses) return std::nullopt;
  return static_cast<GazeClass>(v);
}

LetterboxTransform LetterboxTransform::make(int src_w, int src_h, int dst_w, int dst_h) {
  if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0) {
    throw ValidationError("letterbox: image sizes must be positive");
  }
  LetterboxTransform t;
  t.src_w = src_w;
  t.src_h = src_h;
  t.dst_w = dst_w;
  t.dst_h = dst_h;
  // The binding axis is decided in integers so its pad is exactly zero.
  const bool width_binds =
      static_cast<std::int64_t>(dst_w) * src_h <= static_cast<std::int64_t>(dst_h) * src_w;
  if (width_binds) {
    t.scale = static_cast<double>(dst_w) / src_w;
    t.pad_y = std::max(0.0, (dst_h - t.scale * src_h) / 2.0);
  } else {
    t.scale = static_cast<double>(dst_h) / src_h;
    t.pad_x = std::max(0.0, (dst_w - t.scale * src_w) / 2.0);
  }
  return t;
}

double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = std::max(0.0, a.area()) + std::max(0.0, b.area()) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clamp_box(const BBox& box, int img_w, int img_h) {
  const double w = img_w;
  const double h = img_h;
  return BBox{std::clamp(box.x1, 0.0, w), std::clamp(box.y1, 0.0, h), std::clamp(box.x2, 0.0, w),
              std::clamp(box.y2, 0.0, h)};
}

NormBBox to_norm(const BBox& box, int img_w, int img_h) {
  if (img_w <= 0 || img_h <= 0) throw ValidationError("to_norm: image size must be positive");
  const BBox c = clamp_box(box, img_w, img_h);
  if (!(c.width() > 0.0) || !(c.height() > 0.0)) throw ValidationError("degenerate box");
  return NormBBox{(c.x1 + c.x2) / (2.0 * img_w), (c.y1 + c.y2) / (2.0 * img_h), c.width() / img_w,
                  c.height() / img_h};
}

BBox from_norm(const NormBBox& nb, int img_w, int img_h) {
  const double cx = nb.cx * img_w;
  const double cy = nb.cy * img_h;
  const double hw = nb.w * img_w / 2.0;
  const double hh = nb.h * img_h / 2.0;
  return BBox{cx - hw, cy - hh, cx + hw, cy + hh};
}

BBox letterbox_map(const LetterboxTransform& t, const BBox& box) {
  return BBox{box.x1 * t.scale + t.pad_x, box.y1 * t.scale + t.pad_y, box.x2 * t.scale + t.pad_x,
              box.y2 * t.scale + t.pad_y};
}

BBox letterbox_unmap(const LetterboxTransform& t, const BBox& box) {
  return BBox{(box.x1 - t.pad_x) / t.scale, (box.y1 - t.pad_y) / t.scale,
              (box.x2 - t.pad_x) / t.scale, (box.y2 - t.pad_y) / t.scale};
}

}  // namespace bgz
