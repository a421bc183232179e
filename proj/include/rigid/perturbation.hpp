#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rigid/core.hpp"
#include "rigid/random.hpp"

namespace rigid {

enum class NoiseDistribution { kGaussian, kLaplace, kGamma, kChiSquare };

inline constexpr NoiseDistribution kAllNoiseDistributions[] = {
    NoiseDistribution::kLaplace, NoiseDistribution::kGamma, NoiseDistribution::kChiSquare,
    NoiseDistribution::kGaussian};

inline std::string_view to_string(NoiseDistribution d) {
  switch (d) {
    case NoiseDistribution::kGaussian: return "gaussian";
    case NoiseDistribution::kLaplace: return "laplace";
    case NoiseDistribution::kGamma: return "gamma";
    case NoiseDistribution::kChiSquare: return "chi_square";
  }
  return "?";
}

inline NoiseDistribution parse_noise_distribution(std::string_view name) {
  for (auto d : kAllNoiseDistributions) {
    if (name == to_string(d)) return d;
  }
  throw ValidationError("unknown noise distribution '" + std::string(name) +
                        "' (expected gaussian|laplace|gamma|chi_square)");
}

struct NoiseSpec {
  NoiseDistribution distribution = NoiseDistribution::kGaussian;
  double lambda = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0) {
      throw ValidationError("noise lambda must be finite and >= 0");
    }
  }
};

// Shape parameters of the non-Gaussian families. Each is standardized
// analytically to mean 0, variance 1 before the lambda scaling.
inline constexpr double kLaplaceScale = std::numbers::sqrt2 / 2.0;  // variance 2b^2 = 1
inline constexpr double kGammaShape = 2.0;                           // mean 2, variance 2
inline constexpr double kChiSquareDof = 4.0;                         // mean 4, variance 8

/// Draws one standardized (mean 0, variance 1) variate.
class UnitNoise {
 public:
  explicit UnitNoise(NoiseDistribution d)
      : distribution_(d), gamma_(kGammaShape, 1.0), chi_square_(kChiSquareDof) {}

  double operator()(Rng& rng) {
    switch (distribution_) {
      case NoiseDistribution::kGaussian:
        return normal_(rng);
      case NoiseDistribution::kLaplace: {
        // Inverse CDF on u in (-1/2, 1/2).
        double u = uniform_(rng) - 0.5;
        double a = 1.0 - 2.0 * std::abs(u);
        if (a <= 0.0) a = std::numeric_limits<double>::min();
        return -kLaplaceScale * std::copysign(1.0, u) * std::log(a);
      }
      case NoiseDistribution::kGamma:
        return (gamma_(rng) - kGammaShape) / std::sqrt(kGammaShape);
      case NoiseDistribution::kChiSquare:
        return (chi_square_(rng) - kChiSquareDof) / std::sqrt(2.0 * kChiSquareDof);
    }
    return 0.0;
  }

 private:
  NoiseDistribution distribution_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::gamma_distribution<double> gamma_;
  std::chi_squared_distribution<double> chi_square_;
};

/// i.i.d. noise of length `count`, already multiplied by lambda.
/// Deterministic in (spec.seed, stream_index).
inline std::vector<double> sample_noise(std::size_t count, const NoiseSpec& spec,
                                        std::uint64_t stream_index) {
  spec.validate();
  std::vector<double> out(count, 0.0);
  if (spec.lambda == 0.0) return out;
  Rng rng = make_rng(spec.seed, stream_index);
  UnitNoise draw(spec.distribution);
  for (auto& v : out) v = spec.lambda * draw(rng);
  return out;
}

/// x + lambda * delta, unclamped. `x` is left untouched.
inline ImageTensor perturb(const ImageTensor& x, const NoiseSpec& spec,
                           std::uint64_t stream_index) {
  spec.validate();
  if (spec.lambda == 0.0) return x;
  auto noise = sample_noise(x.size(), spec, stream_index);
  std::vector<float> data(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<float>(data[i] + noise[i]);
  }
  return ImageTensor(x.height(), x.width(), std::move(data), /*perturbed=*/true);
}

}  // namespace rigid
