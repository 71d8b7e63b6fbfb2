#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bgz/backend.hpp"
#include "bgz/dataset.hpp"
#include "bgz/detector.hpp"
#include "bgz/ensemble.hpp"
#include "bgz/evaluation.hpp"
#include "bgz/io.hpp"
#include "bgz/tuning.hpp"

namespace bgz {

// Image files under a directory (recursive, sorted by relative path), or the
// single file itself. Names are relative to `root` with '/' separators.
struct ImageList {
  std::filesystem::path root;
  std::vector<std::string> names;

  std::filesystem::path file(const std::string& name) const { return root / name; }
};

ImageList list_images(const std::filesystem::path& dir_or_file);

std::vector<ImageDetections> detect_images(const ImageList& images, const ModelHandle& detector,
                                           const DetectorConfig& cfg, int jobs);

struct ExtractOptions {
  std::optional<Split> split;  // nullopt = every record
  double assoc_iou = 0.5;
  int top_n = 10;
  int jobs = 1;
};

struct ExtractStats {
  int frames = 0;
  int detections = 0;
  int associated = 0;
  int selected = 0;
};

// Associates each frame's detections with its annotated billboards, keeps
// the top-n largest per (billboard, driver) and embeds the full frame (once
// per frame) and every selected crop. Rows are sorted by sample_id.
std::vector<RawFeatureRow> extract_features(const Manifest& manifest,
                                            const std::vector<ImageDetections>& detections,
                                            const ModelHandle& embedder, const ExtractOptions& opts,
                                            ExtractStats* stats = nullptr);

struct TrainOptions {
  FeatureSpec spec;
  int folds = 5;
  std::uint64_t seed = 42;
  SearchSpace search;
};

// Fits PCA on the given rows, assembles the requested features and runs the
// grouped-CV search. Every row must carry a label.
EnsembleModel train_model(const std::vector<RawFeatureRow>& rows, const TrainOptions& opts,
                          TuningReport* report = nullptr);

std::vector<double> assemble_row(const EnsembleModel& model, const RawFeatureRow& row);

std::vector<PredictionRow> classify_rows(const EnsembleModel& model,
                                         const std::vector<RawFeatureRow>& rows);

struct ImageClassification {
  Detection det;
  Proba proba{};
  GazeClass pred = GazeClass::None;
};

// Single-image path: detect, embed, classify every detection.
std::vector<ImageClassification> classify_image(const cv::Mat& rgb, const EnsembleModel& model,
                                                const ModelHandle& detector,
                                                const ModelHandle& embedder,
                                                const DetectorConfig& cfg);

// One row per billboard_id (sorted), probabilities summed over its rows.
std::vector<AggregateRow> aggregate_predictions(const std::vector<PredictionRow>& preds);

// Per-detection truth comes from (frame, billboard_id); the aggregated truth
// of a billboard is the majority of its rows' truths, ties to the lower class.
ClsEvalReport evaluate_predictions(const std::vector<PredictionRow>& preds,
                                   const std::map<std::pair<std::string, std::string>, GazeClass>& truth,
                                   bool aggregated);

// Pairs predictions with YOLO label files by relative path stem. Label boxes
// are converted to pixels using the matching image under `images_dir`.
std::vector<ImageEval> load_detection_eval(const std::vector<ImageDetections>& preds,
                                           const std::filesystem::path& labels_dir,
                                           const std::filesystem::path& images_dir);

std::string det_report_json(const DetEvalReport& r);
std::string cls_report_json(const ClsEvalReport& r);

// Writes text to a file, throwing RuntimeFailure when it cannot.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bgz
