#pragma once

#include <optional>
#include <vector>

#include <opencv2/core.hpp>

#include "bgz/core.hpp"

namespace bgz {

struct Annotation {
  Detection det;
  std::optional<GazeClass> gaze;  // unclassified detections are drawn in gray
};

// RGB box color per class: none green, medium orange, long red.
cv::Scalar class_color(const std::optional<GazeClass>& gaze);

// Caption box placed above the detection (below its top edge when there is
// no room). Exposed so callers and tests can reason about drawn regions.
cv::Rect caption_rect(const Annotation& a, const cv::Size& image_size);

std::string caption_text(const Annotation& a);

// Returns a copy of `rgb` with one rectangle and one caption per annotation,
// drawn in ascending score order.
cv::Mat annotate(const cv::Mat& rgb, const std::vector<Annotation>& annotations);

}  // namespace bgz
