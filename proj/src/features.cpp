#include "bgz/features.hpp"

#include <cmath>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "bgz/error.hpp"
#include "bgz/image.hpp"

namespace bgz {

void FeatureSpec::validate() const {
  if (!use_b && !use_ifull && !use_icrop) throw ValidationError("feature spec selects no features");
  if ((use_ifull || use_icrop) && pca_k < 1) throw ValidationError("pca_k must be at least 1");
  if (pca_k > static_cast<int>(kEmbeddingDim)) throw ValidationError("pca_k exceeds embedding width");
}

std::size_t FeatureSpec::width() const {
  return (use_b ? 4 : 0) + (use_ifull ? pca_k : 0) + (use_icrop ? pca_k : 0);
}

FeatureSpec FeatureSpec::parse(const std::string& text, int pca_k) {
  FeatureSpec spec{false, false, false, pca_k};
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "B") {
      spec.use_b = true;
    } else if (tok == "Ifull") {
      spec.use_ifull = true;
    } else if (tok == "Icrop") {
      spec.use_icrop = true;
    } else {
      throw ValidationError("unknown feature family '" + tok + "' (expected B, Ifull, Icrop)");
    }
  }
  spec.validate();
  return spec;
}

std::string FeatureSpec::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(use_b, "B");
  add(use_ifull, "Ifull");
  add(use_icrop, "Icrop");
  return out;
}

std::vector<FeatureSpec> all_feature_specs(int pca_k) {
  return {{true, false, false, pca_k}, {false, true, false, pca_k}, {false, false, true, pca_k},
          {false, true, true, pca_k},  {true, true, false, pca_k},  {true, false, true, pca_k},
          {true, true, true, pca_k}};
}

Embedding embed(const cv::Mat& rgb_region, const ModelHandle& model, EmbeddingSource source) {
  if (rgb_region.empty() || rgb_region.rows < 1 || rgb_region.cols < 1) {
    throw ValidationError("embed: degenerate region");
  }
  require_rgb(rgb_region, "embed");

  cv::Mat resized;
  cv::resize(rgb_region, resized, cv::Size(kEmbedInputSize, kEmbedInputSize), 0, 0, cv::INTER_LINEAR);

  static constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
  static constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};
  const std::size_t plane = static_cast<std::size_t>(kEmbedInputSize) * kEmbedInputSize;
  Tensor input({1, 3, kEmbedInputSize, kEmbedInputSize});
  for (int y = 0; y < kEmbedInputSize; ++y) {
    const auto* row = resized.ptr<cv::Vec3b>(y);
    for (int x = 0; x < kEmbedInputSize; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * kEmbedInputSize + x;
      for (int c = 0; c < 3; ++c) {
        input.data[c * plane + idx] = (row[x][c] / 255.0f - kMean[c]) / kStd[c];
      }
    }
  }

  const Tensor out = model.forward_one(input);
  const Shape& s = out.shape;
  if (s.empty() || s.back() != static_cast<std::int64_t>(kEmbeddingDim) || (s.size() > 1 && s[0] != 1)) {
    throw ValidationError("embedding model output " + shape_string(s) +
                          " is not (1, [tokens,] 384)");
  }
  // CLS is the first token for token-state outputs and the only row otherwise.
  Embedding e;
  e.source = source;
  e.values.assign(out.data.begin(), out.data.begin() + kEmbeddingDim);
  for (float v : e.values) {
    if (!std::isfinite(v)) throw RuntimeFailure("embedding model produced a non-finite value");
  }
  return e;
}

cv::Mat crop_for_embedding(const cv::Mat& rgb, const BBox& box) {
  require_rgb(rgb, "crop_for_embedding");
  const BBox c = clamp_box(box, rgb.cols, rgb.rows);
  const int x0 = static_cast<int>(std::floor(c.x1));
  const int y0 = static_cast<int>(std::floor(c.y1));
  const int x1 = static_cast<int>(std::ceil(c.x2));
  const int y1 = static_cast<int>(std::ceil(c.y2));
  if (!(c.width() > 0.0) || !(c.height() > 0.0) || x1 <= x0 || y1 <= y0) {
    throw ValidationError("crop_for_embedding: zero-area box after clamping");
  }
  return rgb(cv::Rect(x0, y0, x1 - x0, y1 - y0)).clone();
}

std::vector<double> assemble(const FeatureSpec& spec, const std::optional<NormBBox>& nb,
                             const PcaTransform* pca_full, const PcaTransform* pca_crop,
                             const std::optional<Embedding>& e_full,
                             const std::optional<Embedding>& e_crop) {
  spec.validate();
  std::vector<double> v;
  v.reserve(spec.width());
  if (spec.use_b) {
    if (!nb) throw ValidationError("assemble: missing bounding-box feature");
    v.insert(v.end(), {nb->cx, nb->cy, nb->w, nb->h});
  }
  auto add_block = [&](const PcaTransform* pca, const std::optional<Embedding>& e, const char* what) {
    if (!pca || !e) throw ValidationError(std::string("assemble: missing ") + what + " input");
    if (static_cast<int>(pca->k()) != spec.pca_k) {
      throw ValidationError(std::string("assemble: ") + what + " PCA width does not match pca_k");
    }
    const auto p = pca_project(*pca, std::span<const float>(e->values));
    v.insert(v.end(), p.begin(), p.end());
  };
  if (spec.use_ifull) add_block(pca_full, e_full, "I_full");
  if (spec.use_icrop) add_block(pca_crop, e_crop, "I_crop");
  return v;
}

}  // namespace bgz
