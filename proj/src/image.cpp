#include "bgz/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bgz/error.hpp"

namespace bgz {

cv::Mat load_rgb(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("missing image file: " + path.string());
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw ValidationError("cannot decode image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void save_rgb(const std::filesystem::path& path, const cv::Mat& rgb) {
  require_rgb(rgb, "save_rgb");
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw RuntimeFailure("cannot write image: " + path.string());
}

void require_rgb(const cv::Mat& image, const char* what) {
  if (image.empty() || image.rows < 1 || image.cols < 1) {
    throw ValidationError(std::string(what) + ": empty image");
  }
  if (image.type() != CV_8UC3) throw ValidationError(std::string(what) + ": expected 8-bit RGB image");
}

}  // namespace bgz
