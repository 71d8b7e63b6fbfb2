#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgz/core.hpp"

namespace bgz {

struct GtBox {
  int class_id = 0;
  NormBBox box;
};

struct GtLabelFile {
  std::vector<GtBox> boxes;
};

// YOLO label text: "class cx cy w h" per line, normalized. An empty file is a
// negative image. Errors name the offending line.
GtLabelFile parse_yolo_labels(const std::filesystem::path& path);
GtLabelFile parse_yolo_text(const std::string& text, const std::string& source = "<labels>");

enum class Split { Train, Test };

std::string to_string(Split s);
Split parse_split(const std::string& text);

struct SampleRecord {
  std::string image_path;  // relative to <root>/images
  std::string billboard_id;
  std::string driver_id;
  GazeClass gaze_label = GazeClass::None;
  std::optional<NormBBox> gt_box;
  Split split = Split::Train;
  int frame_slot = 0;  // position among the frame's manifest rows, i.e. its label line
};

struct Manifest {
  std::filesystem::path root;
  std::vector<SampleRecord> records;  // sorted by (image_path, billboard_id)
  int frames = 0;
  int train_billboards = 0;
  int test_billboards = 0;
  int missing_labels = 0;

  std::filesystem::path image_file(const SampleRecord& r) const;
};

inline constexpr const char* kManifestHeader = "frame,billboard_id,driver_id,gaze_class,split";

// Reads <root>/manifest.csv, pairs rows with <root>/labels/<stem>.txt boxes
// (i-th manifest row of a frame with the i-th label line) and checks every
// image exists under <root>/images. A split file ("billboard_id,split"),
// when given, must agree with the manifest and mention only known ids.
Manifest build_manifest(const std::filesystem::path& root,
                        const std::optional<std::filesystem::path>& split_file = std::nullopt);

// Rows within a frame are written in frame_slot order so the file pairs with
// the same label lines when read back.
void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

struct GtInstance {
  BBox box;
  std::string billboard_id;
};

struct Association {
  std::size_t det_index = 0;
  std::string billboard_id;
};

// Greedy in score order: each detection takes the highest-IoU unassigned GT
// instance with IoU >= iou_min. Unmatched detections are dropped.
std::vector<Association> associate(std::span<const Detection> dets, std::span<const GtInstance> gts,
                                   double iou_min = 0.5);

/// A detection tied to one billboard in one frame: the unit that becomes a
/// classifier row.
struct DetectionSample {
  std::string sample_id;  // "<image_path>#<det_id>"
  SampleRecord record;
  Detection det;
  int det_id = 0;
};

std::string make_sample_id(const std::string& image_path, int det_id);

// Keeps, per (billboard_id, driver_id), the n samples with the largest box
// area in pixels; ties go to the lexicographically smaller image path.
// Output is sorted by sample_id.
std::vector<DetectionSample> select_top_frames(std::vector<DetectionSample> samples, int n = 10);

}  // namespace bgz
