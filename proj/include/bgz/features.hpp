#pragma once

#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "bgz/backend.hpp"
#include "bgz/core.hpp"
#include "bgz/pca.hpp"

namespace bgz {

inline constexpr std::size_t kEmbeddingDim = 384;
inline constexpr int kEmbedInputSize = 224;

enum class EmbeddingSource { Full, Crop };

struct Embedding {
  std::vector<float> values;  // exactly kEmbeddingDim finite entries
  EmbeddingSource source = EmbeddingSource::Full;
};

/// Which feature families make up a classifier row, and the PCA width used
/// for each embedding family.
struct FeatureSpec {
  bool use_b = true;
  bool use_ifull = false;
  bool use_icrop = false;
  int pca_k = 3;

  void validate() const;
  std::size_t width() const;

  // "B", "Ifull", "Icrop" separated by commas, any order.
  static FeatureSpec parse(const std::string& text, int pca_k = 3);
  std::string to_string() const;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// All seven non-empty flag combinations in a fixed order.
std::vector<FeatureSpec> all_feature_specs(int pca_k = 3);

struct FeatureRow {
  std::string sample_id;
  std::string billboard_id;
  std::string driver_id;
  std::vector<double> vector;
  std::optional<GazeClass> label;
};

// Squash-resizes the region to 224x224 (bilinear), applies ImageNet channel
// normalization and returns the CLS slot of the first model output.
Embedding embed(const cv::Mat& rgb_region, const ModelHandle& model,
                EmbeddingSource source = EmbeddingSource::Full);

// Pixel-aligned crop covering the clamped box: floor on the low edges,
// ceil on the high edges, no context margin. Returns a deep copy.
cv::Mat crop_for_embedding(const cv::Mat& rgb, const BBox& box);

// Concatenates [B | PCA(I_full) | PCA(I_crop)], omitting disabled blocks.
std::vector<double> assemble(const FeatureSpec& spec, const std::optional<NormBBox>& nb,
                             const PcaTransform* pca_full, const PcaTransform* pca_crop,
                             const std::optional<Embedding>& e_full,
                             const std::optional<Embedding>& e_crop);

}  // namespace bgz
