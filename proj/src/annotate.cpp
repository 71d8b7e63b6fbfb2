#include "bgz/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "bgz/image.hpp"

namespace bgz {
namespace {

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;
constexpr double kFontScale = 0.5;
constexpr int kFontThickness = 1;
constexpr int kPad = 3;

cv::Rect pixel_rect(const BBox& b, const cv::Size& size) {
  const BBox c = clamp_box(b, size.width, size.height);
  const int x1 = static_cast<int>(std::floor(c.x1));
  const int y1 = static_cast<int>(std::floor(c.y1));
  const int x2 = std::max(x1 + 1, static_cast<int>(std::ceil(c.x2)));
  const int y2 = std::max(y1 + 1, static_cast<int>(std::ceil(c.y2)));
  return {x1, y1, x2 - x1, y2 - y1};
}

}  // namespace

cv::Scalar class_color(const std::optional<GazeClass>& gaze) {
  if (!gaze) return {160, 160, 160};
  switch (*gaze) {
    case GazeClass::None: return {0, 200, 0};
    case GazeClass::Medium: return {255, 165, 0};
    case GazeClass::Long: return {230, 0, 0};
  }
  return {160, 160, 160};
}

std::string caption_text(const Annotation& a) {
  char score[16];
  std::snprintf(score, sizeof score, "%.2f", a.det.score);
  const std::string label = a.gaze ? std::string(to_string(*a.gaze)) : std::string("billboard");
  return label + " " + score;
}

cv::Rect caption_rect(const Annotation& a, const cv::Size& image_size) {
  int baseline = 0;
  const cv::Size text = cv::getTextSize(caption_text(a), kFont, kFontScale, kFontThickness, &baseline);
  const cv::Rect box = pixel_rect(a.det.box, image_size);
  const int w = text.width + 2 * kPad;
  const int h = text.height + baseline + 2 * kPad;
  int y = box.y - h;
  if (y < 0) y = box.y;
  return cv::Rect(box.x, y, w, h) & cv::Rect(0, 0, image_size.width, image_size.height);
}

cv::Mat annotate(const cv::Mat& rgb, const std::vector<Annotation>& annotations) {
  require_rgb(rgb, "annotate");
  cv::Mat out = rgb.clone();
  // Low scores first, so the most confident caption ends up on top.
  std::vector<const Annotation*> order;
  for (const auto& a : annotations) order.push_back(&a);
  std::stable_sort(order.begin(), order.end(),
                   [](const Annotation* x, const Annotation* y) { return x->det.score < y->det.score; });
  for (const Annotation* ap : order) {
    const Annotation& a = *ap;
    const cv::Scalar color = class_color(a.gaze);
    cv::rectangle(out, pixel_rect(a.det.box, out.size()), color, 2, cv::LINE_8);
    const cv::Rect cap = caption_rect(a, out.size());
    if (cap.area() <= 0) continue;
    cv::rectangle(out, cap, color, cv::FILLED, cv::LINE_8);
    int baseline = 0;
    cv::getTextSize(caption_text(a), kFont, kFontScale, kFontThickness, &baseline);
    cv::putText(out, caption_text(a), {cap.x + kPad, cap.y + cap.height - kPad - baseline}, kFont, kFontScale,
                {0, 0, 0}, kFontThickness, cv::LINE_8);
  }
  return out;
}

}  // namespace bgz
