#pragma once

#include <vector>

#include <opencv2/core.hpp>

#include "bgz/backend.hpp"
#include "bgz/core.hpp"

namespace bgz {

struct DetectorConfig {
  int input_size = 640;
  double conf_threshold = 0.25;
  double nms_iou_threshold = 0.70;
  int max_detections = 300;

  void validate() const;
};

struct Preprocessed {
  Tensor tensor;  // (1,3,S,S), RGB, values in [0,1]
  LetterboxTransform transform;
};

inline constexpr float kLetterboxPad = 114.0f / 255.0f;

/// Letterboxes an RGB image into the square detector input: bilinear,
/// aspect-preserving, gray (114) padding, channel-first, scaled to [0,1].
/// Pixel centers follow the same continuous mapping as letterbox_map, so
/// fractional padding stays consistent with decode().
Preprocessed preprocess(const cv::Mat& rgb, const DetectorConfig& cfg);

/// Converts a (1, 5, A) head output into source-pixel detections above the
/// confidence threshold. Boxes left without area after clamping are dropped;
/// no suppression is applied here.
std::vector<Detection> decode(const Tensor& raw, const LetterboxTransform& t,
                              const DetectorConfig& cfg);

/// Greedy class-agnostic suppression; output is score-descending with ties
/// ordered by (x1, y1) and truncated to max_detections.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold,
                           int max_detections = 300);

std::vector<Detection> detect(const cv::Mat& rgb, const ModelHandle& model,
                              const DetectorConfig& cfg);

}  // namespace bgz
