#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rigid/perturbation.hpp"

namespace rigid {
namespace {

struct Moments {
  double mean;
  double variance;
};

Moments moments(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, var / static_cast<double>(v.size())};
}

TEST(SampleNoise, ZeroLambdaGivesZeroField) {
  auto noise = sample_noise(1000, {NoiseDistribution::kLaplace, 0.0, 3}, 1);
  for (double v : noise) EXPECT_EQ(v, 0.0);
}

TEST(SampleNoise, GaussianMomentsAtOneMillion) {
  auto noise = sample_noise(1'000'000, {NoiseDistribution::kGaussian, 1.0, 42}, 0);
  auto m = moments(noise);
  EXPECT_GE(m.mean, -0.01);
  EXPECT_LE(m.mean, 0.01);
  EXPECT_GE(m.variance, 0.99);
  EXPECT_LE(m.variance, 1.01);
}

// Standard errors at 1e6 samples: mean 1e-3; variance sqrt((kurt - 1) / N),
// kurtosis 3 (Gaussian), 6 (Laplace), 6 (Gamma k=2: 3 + 6/k), 6 (chi^2 df=4:
// 3 + 12/df). 3-sigma bounds below use those kurtoses.
TEST(SampleNoise, EveryFamilyIsStandardized) {
  struct Case {
    NoiseDistribution d;
    double kurtosis;
  };
  for (auto [d, kurt] : {Case{NoiseDistribution::kGaussian, 3.0}, Case{NoiseDistribution::kLaplace, 6.0},
                         Case{NoiseDistribution::kGamma, 6.0}, Case{NoiseDistribution::kChiSquare, 6.0}}) {
    auto noise = sample_noise(1'000'000, {d, 1.0, 9}, 5);
    auto m = moments(noise);
    const double var_bound = 3.0 * std::sqrt((kurt - 1.0) / 1e6);
    EXPECT_NEAR(m.mean, 0.0, 3e-3) << to_string(d);
    EXPECT_NEAR(m.variance, 1.0, var_bound) << to_string(d);
  }
}

TEST(SampleNoise, ChiSquareStandardization) {
  // Recover raw draws: raw = 4 + sqrt(8) z must be non-negative and average 4.
  auto noise = sample_noise(200'000, {NoiseDistribution::kChiSquare, 1.0, 1}, 0);
  double mean_raw = 0.0;
  for (double z : noise) {
    const double raw = 4.0 + std::sqrt(8.0) * z;
    EXPECT_GE(raw, -1e-12);
    mean_raw += raw;
  }
  EXPECT_NEAR(mean_raw / noise.size(), 4.0, 3.0 * std::sqrt(8.0 / 200'000.0));
}

TEST(SampleNoise, GammaLowerBound) {
  // Gamma(2,1) >= 0 so the standardized draw is >= -sqrt(2).
  auto noise = sample_noise(100'000, {NoiseDistribution::kGamma, 1.0, 1}, 0);
  for (double z : noise) EXPECT_GE(z, -std::sqrt(2.0) - 1e-12);
}

TEST(SampleNoise, DeterministicPerStream) {
  NoiseSpec spec{NoiseDistribution::kGaussian, 0.1, 77};
  EXPECT_EQ(sample_noise(64, spec, 3), sample_noise(64, spec, 3));
  EXPECT_NE(sample_noise(64, spec, 3), sample_noise(64, spec, 4));
  NoiseSpec other = spec;
  other.seed = 78;
  EXPECT_NE(sample_noise(64, spec, 3), sample_noise(64, other, 3));
}

TEST(Perturb, ZeroLambdaIsBitExactCopy) {
  ImageTensor x(4, 5, 0.25f);
  x.at(1, 2, 3) = 0.75f;
  auto y = perturb(x, {NoiseDistribution::kGaussian, 0.0, 1}, 0);
  EXPECT_EQ(y, x);
}

TEST(Perturb, DeterministicAndLeavesInputUntouched) {
  ImageTensor x(8, 8, 0.5f);
  const ImageTensor before = x;
  NoiseSpec spec{NoiseDistribution::kLaplace, 0.05, 5};
  auto a = perturb(x, spec, 12);
  auto b = perturb(x, spec, 12);
  EXPECT_EQ(a, b);
  EXPECT_EQ(x, before);
  EXPECT_TRUE(a.perturbed());
}

TEST(Perturb, PixelDeviationMatchesLambda) {
  // 3 x 183 x 183 = 100467 pixels.
  ImageTensor x(183, 183, 0.5f);
  auto y = perturb(x, {NoiseDistribution::kGaussian, 0.05, 2}, 0);
  std::vector<double> dev;
  for (std::size_t i = 0; i < x.size(); ++i) dev.push_back(y.values()[i] - 0.5);
  const double sd = std::sqrt(moments(dev).variance);
  EXPECT_NEAR(sd, 0.05, 0.05 * 0.05);
}

TEST(Perturb, NotClamped) {
  ImageTensor x(32, 32, 1.0f);
  auto y = perturb(x, {NoiseDistribution::kGaussian, 0.1, 3}, 0);
  float max_v = 0.f;
  for (float v : y.values()) max_v = std::max(max_v, v);
  EXPECT_GT(max_v, 1.0f);
}

TEST(Perturb, MeanDisplacementVanishesForAllFamilies) {
  ImageTensor x(100, 100, 0.5f);
  for (auto d : kAllNoiseDistributions) {
    auto y = perturb(x, {d, 0.05, 8}, 0);
    double mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mean += y.values()[i] - 0.5;
    mean /= static_cast<double>(x.size());
    // 3-sigma of the mean of 30000 draws with std 0.05.
    EXPECT_NEAR(mean, 0.0, 3.0 * 0.05 / std::sqrt(30000.0)) << to_string(d);
  }
}

TEST(NoiseSpec, Validation) {
  EXPECT_THROW((NoiseSpec{NoiseDistribution::kGaussian, -0.1, 0}.validate()), ValidationError);
  EXPECT_THROW((NoiseSpec{NoiseDistribution::kGaussian, NAN, 0}.validate()), ValidationError);
  EXPECT_EQ(parse_noise_distribution("chi_square"), NoiseDistribution::kChiSquare);
  EXPECT_THROW(parse_noise_distribution("uniform"), ValidationError);
}

}  // namespace
}  // namespace rigid
