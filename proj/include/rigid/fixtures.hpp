#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "rigid/config.hpp"
#include "rigid/embedder.hpp"
#include "rigid/image.hpp"
#include "rigid/image_io.hpp"
#include "rigid/random.hpp"

namespace rigid {

/// Two-population synthetic dataset for the RFF testbed.
struct SyntheticDatasetSpec {
  int n_real = 100;
  int n_fake = 100;
  int image_size = 8;        // square PNGs, no resize needed downstream
  int input_dim = 16;        // leading tensor components the RFF map reads
  int embedding_dim = 2048;
  double k_real = 0.5;
  double k_fake = 1.0;
  double lambda = 0.1;       // intensity the expectations refer to
  std::uint64_t seed = 0;
  std::string generator = "rff";

  void validate() const {
    if (n_real < 1 || n_fake < 1) throw ValidationError("fixture counts must be >= 1");
    if (image_size < 1) throw ValidationError("fixture image_size must be >= 1");
    if (input_dim < 1 || input_dim > 3 * image_size * image_size) {
      throw ValidationError("fixture input_dim must lie in [1, 3*image_size^2]");
    }
    if (!(k_real > 0.0) || k_fake < k_real) throw ValidationError("fixture requires k_fake >= k_real > 0");
    if (!(lambda >= 0.0)) throw ValidationError("fixture lambda must be >= 0");
    if (generator.empty() || generator == "real") throw ValidationError("fixture generator tag invalid");
  }
};

struct FixtureFiles {
  std::filesystem::path manifest_real;
  std::filesystem::path manifest_fake;
  std::filesystem::path expectations;
  std::filesystem::path config;
};

/// Relative tolerance callers should apply to the expected means.
inline constexpr double kFixtureMeanTolerance = 0.05;

/// Writes PNG images, real/fake manifests, a ready-to-run config.ini and
/// expected.json. Expectations come from the closed-form kernel, never from a
/// pipeline run. Output is byte-identical for identical specs.
inline FixtureFiles generate_fixture(const SyntheticDatasetSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");

  Rng rng = make_rng(spec.seed, 0x46495854ULL);
  std::uniform_int_distribution<int> pixel(0, 255);
  auto write_population = [&](const char* prefix, int count, const char* label,
                              const std::string& generator) {
    std::string csv = "id,path,label,generator\n";
    for (int i = 0; i < count; ++i) {
      RgbImage8 img{spec.image_size, spec.image_size, {}};
      img.pixels.resize(static_cast<std::size_t>(spec.image_size) * spec.image_size * 3);
      for (auto& p : img.pixels) p = static_cast<std::uint8_t>(pixel(rng));
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05d", prefix, i);
      const std::string rel = std::string("images/") + name + ".png";
      write_png(dir / rel, img);
      csv += std::string(name) + "," + rel + "," + label + "," + generator + "\n";
    }
    return csv;
  };

  FixtureFiles files{dir / "manifest_real.csv", dir / "manifest_fake.csv", dir / "expected.json",
                     dir / "config.ini"};
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot write " + p.string());
    out << text;
  };
  write(files.manifest_real, write_population("real", spec.n_real, "real", "real"));
  write(files.manifest_fake, write_population("fake", spec.n_fake, "fake", spec.generator));

  const auto n = static_cast<std::size_t>(spec.input_dim);
  nlohmann::ordered_json expected;
  expected["formula"] = "exp(-k^2 * lambda^2 * n / 2)";
  expected["lambda"] = spec.lambda;
  expected["input_dim"] = spec.input_dim;
  expected["k_real"] = spec.k_real;
  expected["k_fake"] = spec.k_fake;
  expected["expected_similarity_real"] = rff_expected_similarity(spec.k_real, spec.lambda, n);
  expected["expected_similarity_fake"] = rff_expected_similarity(spec.k_fake, spec.lambda, n);
  expected["expected_auc"] = spec.k_real == spec.k_fake ? nlohmann::ordered_json(0.5) : nlohmann::ordered_json(nullptr);
  expected["tolerance"] = kFixtureMeanTolerance;
  expected["n_real"] = spec.n_real;
  expected["n_fake"] = spec.n_fake;
  expected["seed"] = spec.seed;
  write(files.expectations, expected.dump(2) + "\n");

  RunConfig cfg;
  cfg.embedder.kind = EmbedderKind::kRffSynthetic;
  cfg.embedder.input_size = spec.image_size;
  cfg.embedder.resize_short_side = spec.image_size;
  cfg.embedder.embedding_dim = spec.embedding_dim;
  cfg.embedder.synthetic_input_dim = spec.input_dim;
  cfg.embedder.rff_k_real = spec.k_real;
  cfg.embedder.rff_k_fake = spec.k_fake;
  cfg.embedder.synthetic_seed = spec.seed;
  cfg.detector.noise.lambda = spec.lambda;
  cfg.detector.noise.seed = spec.seed;
  cfg.manifest_real = "manifest_real.csv";
  cfg.manifest_fake = "manifest_fake.csv";
  cfg.out_dir = "out";
  cfg.workers = 1;
  write(files.config, cfg.to_ini());
  return files;
}

}  // namespace rigid
