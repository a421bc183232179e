#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rigid/core.hpp"

namespace rigid {

/// Decoded 8-bit RGB image, interleaved, row-major.
struct RgbImage8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  bool valid() const {
    return height > 0 && width > 0 &&
           pixels.size() == static_cast<std::size_t>(height) * width * 3;
  }
};

inline ImageTensor to_tensor(const RgbImage8& img) {
  if (!img.valid()) throw ValidationError("invalid RGB image buffer");
  ImageTensor t(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto* px = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = px[c] / 255.0f;
    }
  }
  return t;
}

/// Rounds to the nearest 8-bit level after clamping to [0,1].
inline RgbImage8 to_rgb8(const ImageTensor& t) {
  RgbImage8 img{t.height(), t.width(), {}};
  img.pixels.resize(static_cast<std::size_t>(t.height()) * t.width() * 3);
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      auto* px = &img.pixels[(static_cast<std::size_t>(y) * t.width() + x) * 3];
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(t.at(c, y, x), 0.0f, 1.0f);
        px[c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return img;
}

namespace detail {

struct ResampleTap {
  int first = 0;
  std::vector<double> weights;
};

// Triangle filter widened by the downscale factor (anti-aliased bilinear).
// Upscaling degenerates to plain bilinear; equal sizes give the identity.
inline std::vector<ResampleTap> bilinear_taps(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double support = std::max(1.0, scale);
  std::vector<ResampleTap> taps(out_size);
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) * scale;
    int lo = static_cast<int>(std::floor(center - support));
    int hi = static_cast<int>(std::ceil(center + support));
    lo = std::max(lo, 0);
    hi = std::min(hi, in_size);
    auto& tap = taps[i];
    tap.first = lo;
    double total = 0.0;
    for (int j = lo; j < hi; ++j) {
      double w = 1.0 - std::abs((j + 0.5 - center) / support);
      w = std::max(w, 0.0);
      tap.weights.push_back(w);
      total += w;
    }
    if (total <= 0.0) {
      int nearest = std::clamp(static_cast<int>(center), 0, in_size - 1);
      tap.first = nearest;
      tap.weights.assign(1, 1.0);
      total = 1.0;
    }
    for (auto& w : tap.weights) w /= total;
    // Trim zero-weight taps so equal-size resampling is an exact copy.
    while (!tap.weights.empty() && tap.weights.front() == 0.0) {
      tap.weights.erase(tap.weights.begin());
      ++tap.first;
    }
    while (!tap.weights.empty() && tap.weights.back() == 0.0) tap.weights.pop_back();
  }
  return taps;
}

}  // namespace detail

/// Separable anti-aliased bilinear resize.
inline ImageTensor resize_bilinear(const ImageTensor& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ValidationError("resize target must be positive");
  if (out_h == src.height() && out_w == src.width()) return src;
  const auto htaps = detail::bilinear_taps(src.width(), out_w);
  const auto vtaps = detail::bilinear_taps(src.height(), out_h);

  ImageTensor horiz(src.height(), out_w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < src.height(); ++y) {
      for (int x = 0; x < out_w; ++x) {
        const auto& tap = htaps[x];
        double acc = 0.0;
        for (std::size_t k = 0; k < tap.weights.size(); ++k) {
          acc += tap.weights[k] * src.at(c, y, tap.first + static_cast<int>(k));
        }
        horiz.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  ImageTensor out(out_h, out_w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < out_h; ++y) {
      const auto& tap = vtaps[y];
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tap.weights.size(); ++k) {
          acc += tap.weights[k] * horiz.at(c, tap.first + static_cast<int>(k), x);
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

inline ImageTensor center_crop(const ImageTensor& src, int size) {
  if (size <= 0 || size > src.height() || size > src.width()) {
    throw ValidationError("center crop " + std::to_string(size) + " exceeds image " +
                          std::to_string(src.height()) + "x" + std::to_string(src.width()));
  }
  const int top = (src.height() - size) / 2;
  const int left = (src.width() - size) / 2;
  ImageTensor out(size, size);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) out.at(c, y, x) = src.at(c, top + y, left + x);
    }
  }
  return out;
}

/// Scales the shorter side to `short_side` (aspect preserved), then crops the
/// central `crop` x `crop` window.
inline ImageTensor resize_and_crop(const ImageTensor& src, int short_side, int crop) {
  if (short_side <= 0 || crop <= 0) throw ValidationError("resize/crop sizes must be positive");
  if (crop > short_side) throw ValidationError("crop size exceeds resize_short_side");
  int out_h, out_w;
  if (src.height() <= src.width()) {
    out_h = short_side;
    out_w = static_cast<int>(std::lround(static_cast<double>(src.width()) * short_side / src.height()));
  } else {
    out_w = short_side;
    out_h = static_cast<int>(std::lround(static_cast<double>(src.height()) * short_side / src.width()));
  }
  return center_crop(resize_bilinear(src, out_h, out_w), crop);
}

}  // namespace rigid
