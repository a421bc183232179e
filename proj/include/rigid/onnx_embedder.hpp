#pragma once

#include <filesystem>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "rigid/core.hpp"
#include "rigid/embedder.hpp"

namespace rigid {

/// Runs an exported backbone (ONNX graph, N x 3 x H x W normalized float32 in,
/// N x d float32 out) through OpenCV's DNN module. Pooling is part of the
/// graph. Calls are serialized on an internal mutex.
class OnnxEmbedder final : public Embedder {
 public:
  explicit OnnxEmbedder(EmbedderConfig config) : config_(std::move(config)) {
    config_.validate();
    if (!std::filesystem::exists(config_.model_path)) {
      throw RuntimeError("model file not found: " + config_.model_path);
    }
    try {
      net_ = cv::dnn::readNetFromONNX(config_.model_path);
    } catch (const cv::Exception& e) {
      throw RuntimeError("cannot load model '" + config_.model_path + "': " + e.what());
    }
    if (net_.empty()) throw RuntimeError("model has no layers: " + config_.model_path);
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
  }

  const EmbedderConfig& config() const { return config_; }

  std::vector<Embedding> embed(std::span<const ImageTensor> batch) const override {
    std::vector<Embedding> out;
    out.reserve(batch.size());
    const std::size_t step = static_cast<std::size_t>(config_.batch_size);
    for (std::size_t start = 0; start < batch.size(); start += step) {
      auto chunk = batch.subspan(start, std::min(step, batch.size() - start));
      auto part = run(chunk);
      for (auto& e : part) out.push_back(std::move(e));
    }
    return out;
  }

 private:
  std::vector<Embedding> run(std::span<const ImageTensor> chunk) const {
    const int n = static_cast<int>(chunk.size());
    const int size = config_.input_size;
    const int dims[] = {n, 3, size, size};
    cv::Mat blob(4, dims, CV_32F);
    auto* dst = blob.ptr<float>();
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    for (int i = 0; i < n; ++i) {
      const auto& x = chunk[i];
      if (x.height() != size || x.width() != size) {
        throw ValidationError("tensor geometry " + std::to_string(x.height()) + "x" +
                              std::to_string(x.width()) + " does not match input_size " +
                              std::to_string(size));
      }
      auto v = x.values();
      for (int c = 0; c < 3; ++c) {
        const float mean = static_cast<float>(config_.norm_mean[c]);
        const float inv_std = static_cast<float>(1.0 / config_.norm_std[c]);
        float* out_plane = dst + (static_cast<std::size_t>(i) * 3 + c) * plane;
        const float* in_plane = v.data() + c * plane;
        for (std::size_t k = 0; k < plane; ++k) out_plane[k] = (in_plane[k] - mean) * inv_std;
      }
    }

    cv::Mat result;
    {
      std::lock_guard lock(mutex_);
      try {
        net_.setInput(blob);
        result = net_.forward().clone();
      } catch (const cv::Exception& e) {
        throw RuntimeError(std::string("model inference failed: ") + e.what());
      }
    }
    if (result.depth() != CV_32F || result.total() % static_cast<std::size_t>(n) != 0) {
      throw RuntimeError("unexpected model output layout");
    }
    const std::size_t d = result.total() / static_cast<std::size_t>(n);
    if (d != static_cast<std::size_t>(config_.embedding_dim)) {
      throw RuntimeError("model emits dim " + std::to_string(d) + ", config declares " +
                         std::to_string(config_.embedding_dim));
    }
    const auto* src = result.ptr<float>();
    std::vector<Embedding> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
      out.emplace_back(std::vector<double>(src + i * d, src + (i + 1) * d));
    }
    return out;
  }

  EmbedderConfig config_;
  mutable cv::dnn::Net net_;
  mutable std::mutex mutex_;
};

}  // namespace rigid
