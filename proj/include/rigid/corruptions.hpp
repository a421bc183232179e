#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rigid/core.hpp"
#include "rigid/image.hpp"
#include "rigid/image_io.hpp"
#include "rigid/random.hpp"

namespace rigid {

enum class CorruptionKind { kGaussianNoise, kJpeg, kGaussianBlur };

inline constexpr CorruptionKind kAllCorruptionKinds[] = {
    CorruptionKind::kGaussianNoise, CorruptionKind::kJpeg, CorruptionKind::kGaussianBlur};

inline std::string_view to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kGaussianNoise: return "gaussian_noise";
    case CorruptionKind::kJpeg: return "jpeg";
    case CorruptionKind::kGaussianBlur: return "gaussian_blur";
  }
  return "?";
}

inline CorruptionKind parse_corruption_kind(std::string_view s) {
  for (auto k : kAllCorruptionKinds) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown corruption '" + std::string(s) +
                        "' (expected gaussian_noise|jpeg|gaussian_blur)");
}

/// The five evaluation levels per corruption, mildest first.
inline std::vector<double> default_corruption_levels(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kGaussianNoise: return {0.05, 0.1, 0.15, 0.2, 0.25};
    case CorruptionKind::kJpeg: return {90, 80, 70, 60, 50};
    case CorruptionKind::kGaussianBlur: return {1, 2, 3, 4, 5};
  }
  return {};
}

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  double level = 0.05;  // noise std, JPEG quality, or blur sigma
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(level) || level <= 0.0) {
      throw ValidationError("corruption level must be finite and > 0");
    }
    if (kind == CorruptionKind::kJpeg &&
        (level < 1.0 || level > 100.0 || level != std::floor(level))) {
      throw ValidationError("JPEG quality must be an integer in [1,100]");
    }
  }
};

/// Normalized 1-D Gaussian kernel of radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("blur sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[i + radius] = w;
    total += w;
  }
  for (auto& w : k) w /= total;
  return k;
}

/// Mirror index with edge repetition (... c b a | a b c ... c | c b a ...).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

inline ImageTensor gaussian_blur(const ImageTensor& x, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int h = x.height(), w = x.width();
  ImageTensor tmp(h, w), out(h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int col = 0; col < w; ++col) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * x.at(c, y, reflect_index(col + k, w));
        }
        tmp.at(c, y, col) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int col = 0; col < w; ++col) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp.at(c, reflect_index(y + k, h), col);
        }
        out.at(c, y, col) = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

/// Applies one storage/transport corruption. Output stays in [0,1].
/// `stream_index` decorrelates the noise corruption between images.
inline ImageTensor corrupt(const ImageTensor& x, const CorruptionSpec& spec,
                           std::uint64_t stream_index = 0) {
  spec.validate();
  switch (spec.kind) {
    case CorruptionKind::kGaussianNoise: {
      Rng rng = make_rng(spec.seed, derive_stream(0x434f5252ULL, stream_index));
      std::normal_distribution<double> normal;
      std::vector<float> data(x.values().begin(), x.values().end());
      for (auto& v : data) {
        v = static_cast<float>(std::clamp(v + spec.level * normal(rng), 0.0, 1.0));
      }
      return ImageTensor(x.height(), x.width(), std::move(data));
    }
    case CorruptionKind::kJpeg:
      return to_tensor(jpeg_round_trip(to_rgb8(x), static_cast<int>(spec.level)));
    case CorruptionKind::kGaussianBlur:
      return gaussian_blur(x, spec.level);
  }
  return x;
}

}  // namespace rigid
