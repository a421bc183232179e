#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rigid/core.hpp"
#include "rigid/embedder.hpp"
#include "rigid/parallel.hpp"
#include "rigid/perturbation.hpp"
#include "rigid/random.hpp"

namespace rigid {

struct DetectorConfig {
  NoiseSpec noise;
  int num_noise_samples = 1;
  std::optional<double> epsilon;

  void validate() const {
    noise.validate();
    if (num_noise_samples < 1) throw ValidationError("num_noise_samples must be >= 1");
    if (epsilon && !(*epsilon >= -1.0 && *epsilon <= 1.0)) {
      throw ValidationError("epsilon must lie in [-1, 1]");
    }
  }
};

/// Stream index of the k-th noise draw for a sample.
constexpr std::uint64_t draw_stream(std::uint64_t sample_stream, std::uint64_t draw) {
  return derive_stream(sample_stream, draw);
}

/// Mean cosine similarity between f(x) and f(x + lambda * delta) over
/// `num_noise_samples` independent draws. Exactly 1 when lambda is 0.
inline double similarity_score(const ImageTensor& x, const Embedder& embedder,
                               const DetectorConfig& cfg, std::uint64_t sample_stream) {
  cfg.validate();
  if (cfg.noise.lambda == 0.0) return 1.0;
  const int k = cfg.num_noise_samples;
  std::vector<ImageTensor> batch;
  batch.reserve(k + 1);
  batch.push_back(x);
  for (int i = 0; i < k; ++i) batch.push_back(perturb(x, cfg.noise, draw_stream(sample_stream, i)));
  auto emb = embedder.embed(batch);
  if (emb.size() != batch.size()) throw RuntimeError("embedder returned wrong batch size");
  double total = 0.0;
  for (int i = 1; i <= k; ++i) total += cosine_similarity(emb[0], emb[i]);
  return total / k;
}

/// Fake iff similarity <= epsilon.
inline Label detect(double similarity, std::optional<double> epsilon) {
  if (!epsilon) throw ValidationError("detection threshold epsilon is not set");
  return similarity <= *epsilon ? Label::kFake : Label::kReal;
}

struct Calibration {
  double epsilon = 0.0;
  double target_tnr = 0.95;
  double achieved_tnr = 0.0;  // fraction of calibration samples with similarity > epsilon
  std::size_t sample_count = 0;
  static constexpr const char* kConvention =
      "lower-tail quantile at 1-based rank m*(1-tnr), linear interpolation between order "
      "statistics (Hyndman-Fan type 4)";
};

inline constexpr std::size_t kMinCalibrationSamples = 20;

/// Threshold from real-image similarities only. The (1 - tnr) quantile is
/// taken on the empirical CDF with linear interpolation, so on distinct
/// values the share of calibration samples strictly above epsilon lies in
/// [tnr, tnr + 1/m).
inline Calibration calibrate_threshold(std::span<const double> real_similarities,
                                       double target_tnr = 0.95) {
  if (real_similarities.size() < kMinCalibrationSamples) {
    throw ValidationError("calibration needs at least " + std::to_string(kMinCalibrationSamples) +
                          " real similarities, got " + std::to_string(real_similarities.size()));
  }
  if (!(target_tnr > 0.0 && target_tnr < 1.0)) {
    throw ValidationError("target TNR must lie in (0, 1)");
  }
  std::vector<double> sorted(real_similarities.begin(), real_similarities.end());
  for (double s : sorted) {
    if (!std::isfinite(s)) throw ValidationError("non-finite similarity in calibration set");
  }
  std::sort(sorted.begin(), sorted.end());
  const auto m = sorted.size();
  const double rank = static_cast<double>(m) * (1.0 - target_tnr);  // 1-based

  double epsilon;
  if (rank < 1.0) {
    epsilon = std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity());
  } else {
    const auto lo = static_cast<std::size_t>(std::floor(rank));  // 1-based
    const double frac = rank - static_cast<double>(lo);
    const double a = sorted[lo - 1];
    const double b = lo < m ? sorted[lo] : a;
    epsilon = frac == 0.0 ? a : a + frac * (b - a);
  }

  Calibration cal;
  cal.epsilon = epsilon;
  cal.target_tnr = target_tnr;
  cal.sample_count = m;
  const auto above = std::count_if(sorted.begin(), sorted.end(), [&](double s) { return s > epsilon; });
  cal.achieved_tnr = static_cast<double>(above) / static_cast<double>(m);
  return cal;
}

/// Monte-Carlo estimate of G(x) = E_{delta ~ N(0, lambda^2 I)} h(f(x + delta), f(x)).
/// Shares the noise streams of similarity_score, so both agree exactly.
inline double smoothed_similarity(const ImageTensor& x, const Embedder& embedder, double lambda,
                                  int num_samples, std::uint64_t seed,
                                  std::uint64_t sample_stream = 0) {
  DetectorConfig cfg;
  cfg.noise = {NoiseDistribution::kGaussian, lambda, seed};
  cfg.num_noise_samples = num_samples;
  return similarity_score(x, embedder, cfg, sample_stream);
}

struct SteinGradient {
  std::vector<double> gradient;
  double norm = 0.0;
};

/// Stein estimate of the gradient of the Gaussian-smoothed objective:
///   (1 / (N lambda^2)) * sum_i delta_i * h(x + delta_i),  delta_i ~ N(0, lambda^2 I).
/// `objective` maps a perturbed point (span<const double>) to a real.
template <class Objective>
SteinGradient stein_gradient(Objective&& objective, std::span<const double> x, double lambda,
                             int num_samples, std::uint64_t seed, std::uint64_t stream = 0) {
  if (!(lambda > 0.0)) throw ValidationError("stein_gradient requires lambda > 0");
  if (num_samples < 1) throw ValidationError("stein_gradient requires at least one sample");
  const NoiseSpec spec{NoiseDistribution::kGaussian, lambda, seed};
  const std::size_t n = x.size();
  std::vector<double> grad(n, 0.0);
  std::vector<double> point(n);
  for (int i = 0; i < num_samples; ++i) {
    auto delta = sample_noise(n, spec, draw_stream(stream, i));
    for (std::size_t j = 0; j < n; ++j) point[j] = x[j] + delta[j];
    const double h = objective(std::span<const double>(point));
    for (std::size_t j = 0; j < n; ++j) grad[j] += delta[j] * h;
  }
  const double scale = 1.0 / (static_cast<double>(num_samples) * lambda * lambda);
  double norm2 = 0.0;
  for (auto& g : grad) {
    g *= scale;
    norm2 += g * g;
  }
  return {std::move(grad), std::sqrt(norm2)};
}

/// Stein gradient of the similarity h(f(x + delta), f(x)) with respect to the
/// pixels of x. Uses the same noise draws as similarity_score.
inline SteinGradient stein_gradient(const ImageTensor& x, const Embedder& embedder, double lambda,
                                    int num_samples, std::uint64_t seed,
                                    std::uint64_t sample_stream = 0) {
  if (!(lambda > 0.0)) throw ValidationError("stein_gradient requires lambda > 0");
  if (num_samples < 1) throw ValidationError("stein_gradient requires at least one sample");
  const NoiseSpec spec{NoiseDistribution::kGaussian, lambda, seed};
  const Embedding base = embedder.embed_one(x);
  const std::size_t n = x.size();
  std::vector<double> grad(n, 0.0);
  constexpr int kChunk = 64;
  for (int start = 0; start < num_samples; start += kChunk) {
    const int count = std::min(kChunk, num_samples - start);
    std::vector<std::vector<double>> deltas;
    std::vector<ImageTensor> batch;
    deltas.reserve(count);
    batch.reserve(count);
    for (int i = 0; i < count; ++i) {
      auto delta = sample_noise(n, spec, draw_stream(sample_stream, start + i));
      std::vector<float> data(x.values().begin(), x.values().end());
      for (std::size_t j = 0; j < n; ++j) data[j] = static_cast<float>(data[j] + delta[j]);
      batch.emplace_back(x.height(), x.width(), std::move(data), true);
      deltas.push_back(std::move(delta));
    }
    auto emb = embedder.embed(batch);
    for (int i = 0; i < count; ++i) {
      const double h = cosine_similarity(emb[i], base);
      for (std::size_t j = 0; j < n; ++j) grad[j] += deltas[i][j] * h;
    }
  }
  const double scale = 1.0 / (static_cast<double>(num_samples) * lambda * lambda);
  double norm2 = 0.0;
  for (auto& g : grad) {
    g *= scale;
    norm2 += g * g;
  }
  return {std::move(grad), std::sqrt(norm2)};
}

// ---------------------------------------------------------------------------
// Cosine-similarity landscape over two random pixel-space directions.

struct LandscapeOptions {
  double alpha_min = -0.5;
  double alpha_max = 0.5;
  double beta_min = -0.5;
  double beta_max = 0.5;
  double step = 0.01;
  std::uint64_t direction_seed = 0;
  int workers = 1;
};

struct LandscapeGrid {
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> values;  // row-major |alphas| x |betas|
  std::uint64_t direction_seed = 0;

  double at(std::size_t ai, std::size_t bi) const { return values[ai * betas.size() + bi]; }

  /// Header row of betas, first column alphas.
  std::string to_csv() const;
};

/// Evenly spaced axis from lo to hi inclusive; values within step*1e-9 of
/// zero snap to exactly 0.
inline std::vector<double> grid_axis(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ValidationError("landscape step must be > 0");
  if (!(hi >= lo)) throw ValidationError("landscape range must satisfy min <= max");
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> axis(count);
  for (std::size_t i = 0; i < count; ++i) {
    double v = lo + static_cast<double>(i) * step;
    if (std::abs(v) < step * 1e-9) v = 0.0;
    axis[i] = v;
  }
  return axis;
}

/// Gaussian direction standardized to empirical mean 0 and unit variance per
/// component.
inline std::vector<double> landscape_direction(std::size_t n, std::uint64_t seed,
                                               std::uint64_t which) {
  Rng rng = make_rng(seed, 0x4c414e44ULL + which);
  std::normal_distribution<double> normal;
  std::vector<double> dir(n);
  for (auto& v : dir) v = normal(rng);
  if (n < 2) return dir;
  double mean = 0.0;
  for (double v : dir) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : dir) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var);
  for (auto& v : dir) v = (v - mean) * inv;
  return dir;
}

inline LandscapeGrid landscape(std::span<const ImageTensor> samples, const Embedder& embedder,
                               const LandscapeOptions& opt) {
  if (samples.empty()) throw ValidationError("landscape needs at least one image");
  for (const auto& x : samples) {
    if (!x.same_shape(samples.front())) throw ValidationError("landscape images must share a shape");
  }
  LandscapeGrid grid;
  grid.alphas = grid_axis(opt.alpha_min, opt.alpha_max, opt.step);
  grid.betas = grid_axis(opt.beta_min, opt.beta_max, opt.step);
  grid.direction_seed = opt.direction_seed;
  const std::size_t na = grid.alphas.size(), nb = grid.betas.size();
  const std::size_t n = samples.front().size();
  const auto u = landscape_direction(n, opt.direction_seed, 0);
  const auto v = landscape_direction(n, opt.direction_seed, 1);

  std::vector<Embedding> bases = embedder.embed(samples);
  std::vector<double> sums(na * nb, 0.0);
  // Rows are independent; each row accumulates over samples in input order.
  parallel_for(na, opt.workers, [&](std::size_t ai) {
    const double a = grid.alphas[ai];
    std::vector<ImageTensor> batch;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto& x = samples[s];
      batch.clear();
      std::vector<std::size_t> cells;
      for (std::size_t bi = 0; bi < nb; ++bi) {
        const double b = grid.betas[bi];
        if (a == 0.0 && b == 0.0) continue;
        std::vector<float> data(x.values().begin(), x.values().end());
        for (std::size_t j = 0; j < n; ++j) data[j] = static_cast<float>(data[j] + a * u[j] + b * v[j]);
        batch.emplace_back(x.height(), x.width(), std::move(data), true);
        cells.push_back(bi);
      }
      auto emb = embedder.embed(batch);
      for (std::size_t c = 0; c < cells.size(); ++c) {
        sums[ai * nb + cells[c]] += cosine_similarity(emb[c], bases[s]);
      }
    }
  });
  grid.values.resize(na * nb);
  const double count = static_cast<double>(samples.size());
  for (std::size_t ai = 0; ai < na; ++ai) {
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const bool origin = grid.alphas[ai] == 0.0 && grid.betas[bi] == 0.0;
      grid.values[ai * nb + bi] = origin ? 1.0 : std::clamp(sums[ai * nb + bi] / count, -1.0, 1.0);
    }
  }
  return grid;
}

inline std::string LandscapeGrid::to_csv() const {
  std::string out = "alpha\\beta";
  char buf[64];
  for (double b : betas) {
    std::snprintf(buf, sizeof buf, ",%.6g", b);
    out += buf;
  }
  out += '\n';
  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    std::snprintf(buf, sizeof buf, "%.6g", alphas[ai]);
    out += buf;
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
      out += ',' + format_double(at(ai, bi));
    }
    out += '\n';
  }
  return out;
}

}  // namespace rigid
