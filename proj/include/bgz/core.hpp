#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace bgz {

/// Axis-aligned box in pixel coordinates, corners (x1,y1) top-left and
/// (x2,y2) bottom-right, origin at the top-left of the image.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x2 >= x1 && y2 >= y1; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Center/size box expressed as fractions of the image width and height.
/// This is the bounding-box feature block fed to the classifier.
struct NormBBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const NormBBox&, const NormBBox&) = default;
};

struct Detection {
  BBox box;
  double score = 0.0;
  int class_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class GazeClass : int { None = 0, Medium = 1, Long = 2 };

inline constexpr int kNumClasses = 3;

inline constexpr std::array<GazeClass, kNumClasses> kAllClasses{GazeClass::None, GazeClass::Medium,
                                                               GazeClass::Long};

std::string_view to_string(GazeClass c);

// Accepts the ordinal encoding ("0", "1", "2") used in manifest files.
GazeClass gaze_class_from_index(int index);
std::optional<GazeClass> parse_gaze_class(std::string_view text);

/// Aspect-preserving resize of a src_w x src_h image into dst_w x dst_h with
/// symmetric padding. Maps x' = x * scale + pad_x (same for y).
struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
  int src_w = 0;
  int src_h = 0;
  int dst_w = 0;
  int dst_h = 0;

  static LetterboxTransform make(int src_w, int src_h, int dst_w, int dst_h);
};

double iou(const BBox& a, const BBox& b);

BBox clamp_box(const BBox& box, int img_w, int img_h);

// Clamps to the image first; throws ValidationError("degenerate box") when
// nothing with positive area remains.
NormBBox to_norm(const BBox& box, int img_w, int img_h);
BBox from_norm(const NormBBox& nb, int img_w, int img_h);

BBox letterbox_map(const LetterboxTransform& t, const BBox& box);
BBox letterbox_unmap(const LetterboxTransform& t, const BBox& box);

}  // namespace bgz
