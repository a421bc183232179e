#pragma once

#include <memory>

#include "rigid/embedder.hpp"
#include "rigid/onnx_embedder.hpp"

namespace rigid {

/// Builds the embedder described by `config`. Synthetic embedders consume
/// the preprocessed tensor (3 x input_size x input_size).
inline std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& config) {
  config.validate();
  const std::size_t tensor_dim = 3ull * config.input_size * config.input_size;
  const auto dim = static_cast<std::size_t>(config.embedding_dim);
  switch (config.kind) {
    case EmbedderKind::kModelFile:
      return std::make_unique<OnnxEmbedder>(config);
    case EmbedderKind::kLinearSynthetic:
      return std::make_unique<LinearEmbedder>(tensor_dim, dim, config.synthetic_seed);
    case EmbedderKind::kRffSynthetic: {
      RffParams p;
      p.input_dim = config.synthetic_input_dim > 0
                        ? static_cast<std::size_t>(config.synthetic_input_dim)
                        : tensor_dim;
      if (p.input_dim > tensor_dim) {
        throw ValidationError("synthetic_input_dim exceeds the preprocessed tensor size");
      }
      p.output_dim = dim;
      p.seed = config.synthetic_seed;
      return make_rff_population_embedder(config.rff_k_real, config.rff_k_fake, p);
    }
  }
  throw ValidationError("unsupported embedder kind");
}

}  // namespace rigid
