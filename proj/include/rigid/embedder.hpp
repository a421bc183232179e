#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rigid/core.hpp"
#include "rigid/image.hpp"
#include "rigid/random.hpp"

namespace rigid {

enum class EmbedderKind { kModelFile, kLinearSynthetic, kRffSynthetic };
enum class Pooling { kClassToken, kMeanPool };

inline std::string_view to_string(EmbedderKind k) {
  switch (k) {
    case EmbedderKind::kModelFile: return "model_file";
    case EmbedderKind::kLinearSynthetic: return "linear_synthetic";
    case EmbedderKind::kRffSynthetic: return "rff_synthetic";
  }
  return "?";
}

inline EmbedderKind parse_embedder_kind(std::string_view s) {
  if (s == "model_file") return EmbedderKind::kModelFile;
  if (s == "linear_synthetic") return EmbedderKind::kLinearSynthetic;
  if (s == "rff_synthetic") return EmbedderKind::kRffSynthetic;
  throw ValidationError("unknown embedder kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Pooling p) {
  return p == Pooling::kClassToken ? "class_token" : "mean_pool";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "class_token") return Pooling::kClassToken;
  if (s == "mean_pool") return Pooling::kMeanPool;
  throw ValidationError("unknown pooling '" + std::string(s) + "'");
}

/// Backbone geometry and normalization. Defaults describe DINOv2 ViT-L/14.
struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::kModelFile;
  std::string model_path;
  int input_size = 224;
  int resize_short_side = 256;
  std::array<double, 3> norm_mean{0.485, 0.456, 0.406};
  std::array<double, 3> norm_std{0.229, 0.224, 0.225};
  int embedding_dim = 1024;
  Pooling pooling = Pooling::kClassToken;
  int batch_size = 16;

  // Synthetic embedders only.
  int synthetic_input_dim = 0;  // leading tensor components consumed; 0 = all
  double rff_k_real = 1.0;
  double rff_k_fake = 1.0;
  std::uint64_t synthetic_seed = 0;

  void validate() const {
    if (input_size <= 0) throw ValidationError("input_size must be > 0");
    if (input_size > resize_short_side) {
      throw ValidationError("input_size must not exceed resize_short_side");
    }
    for (double s : norm_std) {
      if (!(s > 0.0)) throw ValidationError("norm_std components must be > 0");
    }
    if (embedding_dim <= 0) throw ValidationError("embedding_dim must be > 0");
    if (batch_size <= 0) throw ValidationError("batch_size must be > 0");
    if (kind == EmbedderKind::kModelFile && model_path.empty()) {
      throw ValidationError("model_file embedder requires model_path");
    }
    if (kind == EmbedderKind::kRffSynthetic) {
      if (!(rff_k_real > 0.0) || rff_k_fake < rff_k_real) {
        throw ValidationError("rff_synthetic requires k_fake >= k_real > 0");
      }
    }
    if (synthetic_input_dim < 0) throw ValidationError("synthetic_input_dim must be >= 0");
  }
};

/// Resize shorter side, center-crop, keep [0,1] scale. Channel normalization
/// belongs to the embedder so that perturbations act in pixel space.
inline ImageTensor preprocess(const ImageTensor& image, const EmbedderConfig& config) {
  return resize_and_crop(image, config.resize_short_side, config.input_size);
}

inline ImageTensor preprocess(const RgbImage8& image, const EmbedderConfig& config) {
  return preprocess(to_tensor(image), config);
}

/// Feature extractor f(.). Implementations are immutable after construction
/// and safe to share across threads.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::vector<Embedding> embed(std::span<const ImageTensor> batch) const = 0;

  Embedding embed_one(const ImageTensor& x) const {
    auto out = embed(std::span<const ImageTensor>(&x, 1));
    return std::move(out.front());
  }

  /// Embedder to use for a sample carrying `label`. Only the synthetic
  /// two-population testbed distinguishes; everything else returns itself.
  virtual const Embedder& for_label(Label) const { return *this; }
};

namespace detail {

inline std::size_t consumed_dim(std::size_t requested, const ImageTensor& x) {
  if (requested == 0) return x.size();
  if (x.size() < requested) {
    throw ValidationError("tensor has " + std::to_string(x.size()) +
                          " components, embedder needs " + std::to_string(requested));
  }
  return requested;
}

}  // namespace detail

/// E(x) = W * flatten(x) with a fixed random W (rows optionally orthonormal).
class LinearEmbedder final : public Embedder {
 public:
  LinearEmbedder(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                 bool orthonormal_rows = false)
      : input_dim_(input_dim), output_dim_(output_dim), weights_(input_dim * output_dim) {
    if (input_dim == 0 || output_dim == 0) throw ValidationError("linear embedder dims must be > 0");
    if (orthonormal_rows && output_dim > input_dim) {
      throw ValidationError("orthonormal rows need output_dim <= input_dim");
    }
    Rng rng = make_rng(seed, 0x4c494e);
    std::normal_distribution<double> normal;
    for (auto& w : weights_) w = normal(rng);
    if (orthonormal_rows) orthonormalize();
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(weights_).subspan(i * input_dim_, input_dim_);
  }

  std::vector<Embedding> embed(std::span<const ImageTensor> batch) const override {
    std::vector<Embedding> out;
    out.reserve(batch.size());
    for (const auto& x : batch) {
      if (x.size() != input_dim_) {
        throw ValidationError("linear embedder expects " + std::to_string(input_dim_) +
                              " components, got " + std::to_string(x.size()));
      }
      std::vector<double> e(output_dim_, 0.0);
      auto v = x.values();
      for (std::size_t i = 0; i < output_dim_; ++i) {
        const double* w = &weights_[i * input_dim_];
        double acc = 0.0;
        for (std::size_t j = 0; j < input_dim_; ++j) acc += w[j] * v[j];
        e[i] = acc;
      }
      out.emplace_back(std::move(e));
    }
    return out;
  }

 private:
  void orthonormalize() {
    // Modified Gram-Schmidt over rows.
    for (std::size_t i = 0; i < output_dim_; ++i) {
      double* ri = &weights_[i * input_dim_];
      for (std::size_t k = 0; k < i; ++k) {
        const double* rk = &weights_[k * input_dim_];
        double dot = 0.0;
        for (std::size_t j = 0; j < input_dim_; ++j) dot += ri[j] * rk[j];
        for (std::size_t j = 0; j < input_dim_; ++j) ri[j] -= dot * rk[j];
      }
      double norm = 0.0;
      for (std::size_t j = 0; j < input_dim_; ++j) norm += ri[j] * ri[j];
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < input_dim_; ++j) ri[j] /= norm;
    }
  }

  std::size_t input_dim_;
  std::size_t output_dim_;
  std::vector<double> weights_;  // row-major output_dim x input_dim
};

struct RffParams {
  std::size_t input_dim = 16;    // leading tensor components consumed
  std::size_t output_dim = 2048;
  double frequency_scale = 1.0;  // k
  std::uint64_t seed = 0;
};

/// Random Fourier features phi_i(x) = sqrt(2/d) cos(w_i . x + b_i) with
/// w_i ~ N(0, k^2 I) and b_i ~ U[0, 2pi). The inner product of two feature
/// vectors approximates the Gaussian kernel exp(-k^2 |x - y|^2 / 2).
class RffEmbedder final : public Embedder {
 public:
  explicit RffEmbedder(const RffParams& params) : params_(params) {
    if (params.input_dim == 0 || params.output_dim == 0) {
      throw ValidationError("rff dims must be > 0");
    }
    if (!(params.frequency_scale > 0.0)) throw ValidationError("rff frequency scale must be > 0");
    // Unit frequencies and phases depend only on the seed, so embedders that
    // differ only in k share their random draws.
    Rng rng = make_rng(params.seed, 0x524646);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
    frequencies_.resize(params.output_dim * params.input_dim);
    phases_.resize(params.output_dim);
    for (std::size_t i = 0; i < params.output_dim; ++i) {
      for (std::size_t j = 0; j < params.input_dim; ++j) {
        frequencies_[i * params.input_dim + j] = params.frequency_scale * normal(rng);
      }
      phases_[i] = uniform(rng);
    }
  }

  const RffParams& params() const { return params_; }

  Embedding embed_vector(std::span<const double> x) const {
    if (x.size() < params_.input_dim) throw ValidationError("rff input too short");
    const std::size_t n = params_.input_dim;
    const double amp = std::sqrt(2.0 / static_cast<double>(params_.output_dim));
    std::vector<double> e(params_.output_dim);
    for (std::size_t i = 0; i < params_.output_dim; ++i) {
      const double* w = &frequencies_[i * n];
      double arg = phases_[i];
      for (std::size_t j = 0; j < n; ++j) arg += w[j] * x[j];
      e[i] = amp * std::cos(arg);
    }
    return Embedding(std::move(e));
  }

  std::vector<Embedding> embed(std::span<const ImageTensor> batch) const override {
    std::vector<Embedding> out;
    out.reserve(batch.size());
    std::vector<double> buf(params_.input_dim);
    for (const auto& x : batch) {
      detail::consumed_dim(params_.input_dim, x);
      auto v = x.values();
      for (std::size_t j = 0; j < params_.input_dim; ++j) buf[j] = v[j];
      out.push_back(embed_vector(buf));
    }
    return out;
  }

 private:
  RffParams params_;
  std::vector<double> frequencies_;
  std::vector<double> phases_;
};

/// Two RFF embedders sharing their random draws, one per population. Samples
/// tagged fake see the larger frequency scale and are therefore more
/// sensitive to perturbations.
class RffPopulationEmbedder final : public Embedder {
 public:
  RffPopulationEmbedder(double k_real, double k_fake, RffParams params)
      : real_(with_scale(params, k_real)), fake_(with_scale(params, k_fake)) {
    if (!(k_real > 0.0) || k_fake < k_real) {
      throw ValidationError("population embedder requires k_fake >= k_real > 0");
    }
  }

  std::vector<Embedding> embed(std::span<const ImageTensor>) const override {
    throw ValidationError("population embedder needs a label; call for_label() first");
  }

  const Embedder& for_label(Label label) const override {
    return label == Label::kReal ? static_cast<const Embedder&>(real_) : fake_;
  }

  const RffEmbedder& real() const { return real_; }
  const RffEmbedder& fake() const { return fake_; }

 private:
  static RffParams with_scale(RffParams p, double k) {
    p.frequency_scale = k;
    return p;
  }

  RffEmbedder real_;
  RffEmbedder fake_;
};

inline std::unique_ptr<RffPopulationEmbedder> make_rff_population_embedder(double k_real,
                                                                           double k_fake,
                                                                           const RffParams& params) {
  return std::make_unique<RffPopulationEmbedder>(k_real, k_fake, params);
}

/// Large-d limit of the mean perturbed RFF similarity for unit-variance noise
/// of intensity lambda over n input components.
inline double rff_expected_similarity(double k, double lambda, std::size_t n) {
  return std::exp(-k * k * lambda * lambda * static_cast<double>(n) / 2.0);
}

}  // namespace rigid
