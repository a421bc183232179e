#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <system_error>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rigid {

/// Raised for malformed inputs, configs and manifests. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for failures while running (I/O, model backend). Maps to CLI exit code 1.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label { kReal, kFake };

inline std::string_view to_string(Label label) {
  return label == Label::kReal ? "real" : "fake";
}

inline Label parse_label(std::string_view text) {
  if (text == "real") return Label::kReal;
  if (text == "fake") return Label::kFake;
  throw ValidationError("unknown label '" + std::string(text) + "' (expected real|fake)");
}

/// Planar float image, channel-major then row-major. Values are nominally in
/// [0,1]; tensors produced by the detection perturbation may leave that range.
class ImageTensor {
 public:
  static constexpr int kChannels = 3;

  ImageTensor() = default;

  ImageTensor(int height, int width, float fill = 0.0f)
      : height_(height), width_(width) {
    if (height <= 0 || width <= 0) {
      throw ValidationError("image dimensions must be positive, got " +
                            std::to_string(height) + "x" + std::to_string(width));
    }
    data_.assign(static_cast<std::size_t>(kChannels) * height * width, fill);
  }

  ImageTensor(int height, int width, std::vector<float> data, bool perturbed = false)
      : height_(height), width_(width), data_(std::move(data)), perturbed_(perturbed) {
    if (height <= 0 || width <= 0) {
      throw ValidationError("image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(kChannels) * height * width) {
      throw ValidationError("image data length " + std::to_string(data_.size()) +
                            " does not match 3x" + std::to_string(height) + "x" +
                            std::to_string(width));
    }
    for (float v : data_) {
      if (!std::isfinite(v)) throw ValidationError("image contains non-finite values");
    }
  }

  int channels() const { return kChannels; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool perturbed() const { return perturbed_; }
  void mark_perturbed() { perturbed_ = true; }

  std::span<const float> values() const { return data_; }
  std::span<float> values() { return data_; }

  float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }

  bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageTensor& a, const ImageTensor& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
  bool perturbed_ = false;
};

/// Feature vector produced by an embedder. Never empty, never all-zero.
class Embedding {
 public:
  Embedding() = default;

  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ValidationError("embedding must have dim > 0");
    double norm2 = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) throw RuntimeError("embedding contains non-finite values");
      norm2 += v * v;
    }
    if (norm2 <= 0.0) throw RuntimeError("embedding has zero norm");
  }

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct SampleRecord {
  std::string id;
  std::string path;
  Label label = Label::kReal;
  std::string generator;
};

struct ScoreRecord {
  std::string sample_id;
  double similarity = 1.0;
  double detection_score = 0.0;
  Label label = Label::kReal;
  std::string generator;

  static ScoreRecord make(std::string id, double similarity, Label label,
                          std::string generator) {
    return {std::move(id), similarity, 1.0 - similarity, label, std::move(generator)};
  }
};

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

/// Cosine of the angle between two vectors, clamped to [-1, 1].
///
/// The dot product and both squared norms are accumulated in the same loop so
/// that identical inputs yield exactly 1.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw ValidationError("cosine_similarity: zero-norm input");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
  return cosine_similarity(a.values(), b.values());
}

}  // namespace rigid
