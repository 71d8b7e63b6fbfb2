#pragma once

#include <array>
#include <span>
#include <vector>

#include "bgz/core.hpp"

namespace bgz {

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct MatchResult {
  std::vector<bool> true_positive;  // one flag per detection, input order
  int unmatched_gt = 0;
};

// Detections must already be sorted by score, highest first. Each one takes
// the highest-IoU GT not yet matched, provided IoU >= iou_threshold.
MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                             double iou_threshold);

struct ScoredMatch {
  double score = 0.0;
  bool true_positive = false;
};

// Cumulative precision/recall in score order (ties keep insertion order).
std::vector<PrPoint> pr_curve(std::span<const ScoredMatch> matches, int total_gt);

// 101-point interpolated AP. With total_gt == 0 the result is 1 when there
// are no detections and 0 otherwise.
double average_precision(std::span<const ScoredMatch> matches, int total_gt);

double map_range(std::span<const double> aps);

inline constexpr std::array<double, 10> kCocoIouThresholds{0.50, 0.55, 0.60, 0.65, 0.70,
                                                           0.75, 0.80, 0.85, 0.90, 0.95};

struct ImageEval {
  std::vector<Detection> dets;
  std::vector<BBox> gts;
};

struct DetEvalReport {
  double pr_iou = 0.5;
  double precision = 0.0;  // at the F1-optimal confidence, IoU pr_iou
  double ap_at_pr_iou = 0.0;
  double recall = 0.0;
  double f1_threshold = 0.0;
  double map50 = 0.0;
  double map50_95 = 0.0;
  std::array<double, 10> ap_per_threshold{};
  int total_gt = 0;
  int total_dets = 0;
  std::vector<MatchResult> per_image;  // at IoU 0.5
};

DetEvalReport evaluate_detections(std::span<const ImageEval> images, double pr_iou = 0.5);

struct ClsEvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::array<double, kNumClasses> f1{};
  std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};  // [true][pred]
  int total = 0;
};

// Throws ValidationError on length mismatch, empty input or labels outside
// {0,1,2}.
ClsEvalReport classification_report(std::span<const int> y_true, std::span<const int> y_pred);
ClsEvalReport classification_report(std::span<const GazeClass> y_true,
                                     std::span<const GazeClass> y_pred);

}  // namespace bgz
