#include "bgz/detector.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "bgz/error.hpp"
#include "bgz/image.hpp"

namespace bgz {

void DetectorConfig::validate() const {
  if (input_size <= 0 || input_size % 32 != 0) {
    throw ValidationError("detector input_size must be a positive multiple of 32");
  }
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw ValidationError("conf_threshold must lie in [0,1]");
  }
  if (!(nms_iou_threshold >= 0.0 && nms_iou_threshold <= 1.0)) {
    throw ValidationError("nms_iou_threshold must lie in [0,1]");
  }
  if (max_detections < 1) throw ValidationError("max_detections must be positive");
}

Preprocessed preprocess(const cv::Mat& rgb, const DetectorConfig& cfg) {
  require_rgb(rgb, "preprocess");
  cfg.validate();
  const int s = cfg.input_size;
  const auto t = LetterboxTransform::make(rgb.cols, rgb.rows, s, s);

  cv::Mat boxed;
  if (rgb.cols == s && rgb.rows == s) {
    boxed = rgb;
  } else {
    // dst pixel center (i + 0.5) = (j + 0.5) * scale + pad
    const double inv = 1.0 / t.scale;
    cv::Mat m = (cv::Mat_<double>(2, 3) << inv, 0.0, (0.5 - t.pad_x) * inv - 0.5,  //
                 0.0, inv, (0.5 - t.pad_y) * inv - 0.5);
    cv::warpAffine(rgb, boxed, m, cv::Size(s, s), cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                   cv::BORDER_CONSTANT, cv::Scalar(114, 114, 114));
  }

  Preprocessed out{Tensor({1, 3, s, s}), t};
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  for (int y = 0; y < s; ++y) {
    const auto* row = boxed.ptr<cv::Vec3b>(y);
    for (int x = 0; x < s; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * s + x;
      for (int c = 0; c < 3; ++c) out.tensor.data[c * plane + idx] = row[x][c] / 255.0f;
    }
  }
  return out;
}

std::vector<Detection> decode(const Tensor& raw, const LetterboxTransform& t,
                              const DetectorConfig& cfg) {
  if (raw.shape.size() != 3 || raw.shape[0] != 1 || raw.shape[1] != 5) {
    throw ValidationError("decode: expected head output (1,5,A), got " + shape_string(raw.shape));
  }
  const auto anchors = static_cast<std::size_t>(raw.shape[2]);
  if (raw.data.size() != 5 * anchors) throw ValidationError("decode: data does not match shape");
  const float* cx = raw.data.data();
  const float* cy = cx + anchors;
  const float* w = cy + anchors;
  const float* h = w + anchors;
  const float* score = h + anchors;

  std::vector<Detection> dets;
  for (std::size_t a = 0; a < anchors; ++a) {
    const double sc = score[a];
    if (!(sc >= cfg.conf_threshold)) continue;
    const double hw = std::max(0.0f, w[a]) / 2.0;
    const double hh = std::max(0.0f, h[a]) / 2.0;
    BBox boxed{cx[a] - hw, cy[a] - hh, cx[a] + hw, cy[a] + hh};
    Detection d;
    d.box = clamp_box(letterbox_unmap(t, boxed), t.src_w, t.src_h);
    if (d.box.width() <= 0.0 || d.box.height() <= 0.0) continue;  // nothing left inside the image
    d.score = std::clamp(sc, 0.0, 1.0);
    dets.push_back(d);
  }
  return dets;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, int max_detections) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
    return a.box.y1 < b.box.y1;
  });
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    if (static_cast<int>(kept.size()) >= max_detections) break;
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(d.box, k.box) < iou_threshold;
    });
    if (clear) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> detect(const cv::Mat& rgb, const ModelHandle& model,
                              const DetectorConfig& cfg) {
  const auto& in = model.input_specs();
  const Shape expected{1, 3, cfg.input_size, cfg.input_size};
  if (in.size() != 1 || !in[0].accepts(expected)) {
    throw ValidationError("detector model input " +
                          (in.empty() ? std::string("<none>") : shape_string(in[0].shape)) +
                          " does not accept " + shape_string(expected));
  }
  Preprocessed p = preprocess(rgb, cfg);
  Tensor raw = model.forward_one(p.tensor);
  return nms(decode(raw, p.transform, cfg), cfg.nms_iou_threshold, cfg.max_detections);
}

}  // namespace bgz
