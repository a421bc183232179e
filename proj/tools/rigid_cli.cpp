// Command-line front end: score, calibrate, evaluate, robustness,
// sweep-lambda, ablate-noise, landscape, make-fixture.
//
// Exit codes: 0 success, 1 runtime failure (including skipped samples),
// 2 invalid usage or configuration.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rigid/experiments.hpp"
#include "rigid/fixtures.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string manifest_real;
  std::string manifest_fake;
  std::string out;
  std::optional<double> lambda;
  std::string distribution;
  std::optional<double> tnr;
  std::optional<std::uint64_t> seed;
  std::string backbone_config;
  std::vector<double> levels;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Run configuration (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--manifest-real", f.manifest_real, "Manifest CSV of real images");
  cmd->add_option("--manifest-fake", f.manifest_fake, "Manifest CSV of generated images");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--lambda", f.lambda, "Noise intensity")->check(CLI::NonNegativeNumber);
  cmd->add_option("--distribution", f.distribution, "gaussian|laplace|gamma|chi_square");
  cmd->add_option("--tnr", f.tnr, "Target true-negative rate for calibration");
  cmd->add_option("--seed", f.seed, "Noise seed");
  cmd->add_option("--backbone-config", f.backbone_config, "Preprocessing JSON of an exported backbone")
      ->check(CLI::ExistingFile);
  cmd->add_option("--levels", f.levels, "Override level grid (corruption levels or lambdas)")
      ->delimiter(',');
  cmd->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
}

rigid::RunConfig resolve_config(const CommonFlags& f) {
  rigid::RunConfig cfg = f.config.empty() ? rigid::RunConfig{} : rigid::RunConfig::load(f.config);
  if (!f.backbone_config.empty()) cfg.apply_preprocess_json(f.backbone_config);
  if (!f.manifest_real.empty()) cfg.manifest_real = f.manifest_real;
  if (!f.manifest_fake.empty()) cfg.manifest_fake = f.manifest_fake;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.lambda) cfg.detector.noise.lambda = *f.lambda;
  if (!f.distribution.empty()) cfg.detector.noise.distribution = rigid::parse_noise_distribution(f.distribution);
  if (f.tnr) cfg.target_tnr = *f.tnr;
  if (f.seed) cfg.detector.noise.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  cfg.validate();
  return cfg;
}

int report(const rigid::Experiment& exp, const rigid::CommandResult& result) {
  for (const auto& w : exp.warnings()) std::cerr << "warning: " << w << '\n';
  for (const auto& name : result.written) std::cout << (exp.out_dir() / name).string() << '\n';
  std::cerr << "scored " << result.computed << ", cached " << result.cached << ", failed "
            << result.failures.size() << '\n';
  for (const auto& f : result.failures) std::cerr << "  skipped " << f.id << " (" << f.path << "): " << f.error << '\n';
  return result.failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free generated-image detection via embedding perturbation sensitivity"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* score = app.add_subcommand("score", "Score every sample in the manifests");
  auto* calibrate = app.add_subcommand("calibrate", "Pick the similarity threshold from real images");
  auto* evaluate = app.add_subcommand("evaluate", "AUC/AP per generator against the real pool");
  auto* robustness = app.add_subcommand("robustness", "Evaluate under noise, JPEG and blur corruptions");
  auto* sweep = app.add_subcommand("sweep-lambda", "Evaluate across noise intensities");
  auto* ablate = app.add_subcommand("ablate-noise", "Evaluate each noise distribution at a fixed intensity");
  auto* land = app.add_subcommand("landscape", "Cosine-similarity landscape over two random directions");
  for (auto* cmd : {score, calibrate, evaluate, robustness, sweep, ablate, land}) add_common(cmd, flags);

  std::string calibration_file;
  evaluate->add_option("--calibration", calibration_file, "calibration.json from `calibrate`")
      ->check(CLI::ExistingFile);
  std::string kind;
  robustness->add_option("--kind", kind, "gaussian_noise|jpeg|gaussian_blur (default: all)");

  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic two-population RFF dataset");
  rigid::SyntheticDatasetSpec spec;
  std::string fixture_out;
  fixture->add_option("--out", fixture_out, "Output directory")->required();
  fixture->add_option("--n-real", spec.n_real);
  fixture->add_option("--n-fake", spec.n_fake);
  fixture->add_option("--image-size", spec.image_size);
  fixture->add_option("--input-dim", spec.input_dim);
  fixture->add_option("--embedding-dim", spec.embedding_dim);
  fixture->add_option("--k-real", spec.k_real);
  fixture->add_option("--k-fake", spec.k_fake);
  fixture->add_option("--lambda", spec.lambda);
  fixture->add_option("--seed", spec.seed);
  fixture->add_option("--generator", spec.generator);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fixture->parsed()) {
      auto files = rigid::generate_fixture(spec, fixture_out);
      for (const auto& p : {files.manifest_real, files.manifest_fake, files.expectations, files.config}) {
        std::cout << p.string() << '\n';
      }
      return 0;
    }

    const auto cfg = resolve_config(flags);
    if (score->parsed()) {
      rigid::Experiment exp(cfg, false, false);
      return report(exp, rigid::run_score(exp));
    }
    if (calibrate->parsed()) {
      rigid::Experiment exp(cfg, true, false);
      rigid::Calibration cal;
      auto result = rigid::run_calibrate(exp, &cal);
      std::cerr << "epsilon " << cal.epsilon << " (calibration TNR " << cal.achieved_tnr << ")\n";
      return report(exp, result);
    }
    if (evaluate->parsed()) {
      rigid::Experiment exp(cfg, true, true);
      std::optional<double> epsilon;
      if (!calibration_file.empty()) epsilon = rigid::read_calibration_epsilon(calibration_file);
      return report(exp, rigid::run_evaluate(exp, epsilon));
    }
    if (robustness->parsed()) {
      rigid::Experiment exp(cfg, true, true);
      rigid::CommandResult all;
      std::vector<rigid::CorruptionKind> kinds;
      if (kind.empty()) {
        kinds.assign(std::begin(rigid::kAllCorruptionKinds), std::end(rigid::kAllCorruptionKinds));
      } else {
        kinds.push_back(rigid::parse_corruption_kind(kind));
      }
      if (!flags.levels.empty() && kinds.size() != 1) {
        throw rigid::ValidationError("--levels requires a single --kind");
      }
      for (auto k : kinds) {
        auto r = rigid::run_robustness(exp, k, flags.levels);
        all.written.insert(all.written.end(), r.written.begin(), r.written.end());
        all.failures.insert(all.failures.end(), r.failures.begin(), r.failures.end());
        all.computed += r.computed;
        all.cached += r.cached;
      }
      return report(exp, all);
    }
    if (sweep->parsed()) {
      rigid::Experiment exp(cfg, true, true);
      return report(exp, rigid::run_sweep_lambda(exp, flags.levels));
    }
    if (ablate->parsed()) {
      rigid::Experiment exp(cfg, true, true);
      return report(exp, rigid::run_ablate_noise(exp, flags.lambda));
    }
    if (land->parsed()) {
      rigid::Experiment exp(cfg, false, false);
      return report(exp, rigid::run_landscape(exp));
    }
  } catch (const rigid::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
