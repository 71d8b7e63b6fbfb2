#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

namespace bgz {

// Images travel through the library as 8-bit, 3-channel RGB cv::Mat.

cv::Mat load_rgb(const std::filesystem::path& path);
void save_rgb(const std::filesystem::path& path, const cv::Mat& rgb);
void require_rgb(const cv::Mat& image, const char* what);

}  // namespace bgz
