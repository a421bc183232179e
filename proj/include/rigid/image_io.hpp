#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "rigid/core.hpp"
#include "rigid/image.hpp"

namespace rigid {

namespace detail {

inline RgbImage8 from_bgr_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage8 img{rgb.rows, rgb.cols, {}};
  img.pixels.resize(static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + rgb.cols * 3, img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  }
  return img;
}

inline cv::Mat to_bgr_mat(const RgbImage8& img) {
  if (!img.valid()) throw ValidationError("invalid RGB image buffer");
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace detail

/// Decodes a PNG or JPEG file (any channel layout) to 8-bit RGB.
inline RgbImage8 read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw RuntimeError("cannot decode image: " + path.string());
  return detail::from_bgr_mat(bgr);
}

inline void write_png(const std::filesystem::path& path, const RgbImage8& img) {
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
  if (!cv::imwrite(path.string(), detail::to_bgr_mat(img), params)) {
    throw RuntimeError("cannot write PNG: " + path.string());
  }
}

/// Baseline JPEG encode/decode at `quality` (libjpeg defaults, 4:2:0 chroma).
inline RgbImage8 jpeg_round_trip(const RgbImage8& img, int quality) {
  if (quality < 1 || quality > 100) throw ValidationError("JPEG quality must be in [1,100]");
  std::vector<std::uint8_t> bytes;
  const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_OPTIMIZE, 0,
                                cv::IMWRITE_JPEG_PROGRESSIVE, 0};
  if (!cv::imencode(".jpg", detail::to_bgr_mat(img), bytes, params)) {
    throw RuntimeError("JPEG encode failed");
  }
  cv::Mat decoded = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (decoded.empty()) throw RuntimeError("JPEG decode failed");
  return detail::from_bgr_mat(decoded);
}

}  // namespace rigid
