#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bgz/core.hpp"
#include "bgz/softmax.hpp"

namespace bgz {

struct ImageDetections {
  std::string image;
  std::vector<Detection> dets;  // det_id = position in this list
};

// detections.csv: image,det_id,x1,y1,x2,y2,score (6 decimals)
void write_detections_csv(const std::filesystem::path& path, const std::vector<ImageDetections>& images);
std::vector<ImageDetections> read_detections_csv(const std::filesystem::path& path);

inline constexpr std::size_t kRawFeatureWidth = 4 + 384 + 384;

/// One detection's unreduced features: box geometry plus both embeddings.
/// Stored in features.csv as f0..f771 in [B | I_full | I_crop] order.
struct RawFeatureRow {
  std::string sample_id;
  std::string billboard_id;
  std::string driver_id;
  std::optional<GazeClass> label;
  NormBBox box;
  std::vector<double> full;
  std::vector<double> crop;
};

// features.csv: sample_id,billboard_id,driver_id,label,f0,...,f{d-1} (9 decimals)
void write_features_csv(const std::filesystem::path& path, const std::vector<RawFeatureRow>& rows);
std::vector<RawFeatureRow> read_features_csv(const std::filesystem::path& path);

struct PredictionRow {
  std::string sample_id;
  std::string billboard_id;
  std::string driver_id;
  Proba proba{};
  GazeClass pred = GazeClass::None;
};

// preds.csv: sample_id,billboard_id,driver_id,p_none,p_medium,p_long,pred
void write_predictions_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path);

struct AggregateRow {
  std::string billboard_id;
  int count = 0;
  Proba summed{};
  GazeClass pred = GazeClass::None;
};

// aggregated.csv: billboard_id,n,sum_none,sum_medium,sum_long,pred
void write_aggregates_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

// (frame, billboard_id) -> label, read from a manifest CSV without touching
// images or label files.
std::map<std::pair<std::string, std::string>, GazeClass> read_manifest_labels(
    const std::filesystem::path& path);

// Frame part of a "<frame>#<det_id>" sample id.
std::string frame_of_sample(const std::string& sample_id);

}  // namespace bgz
