#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rigid/backends.hpp"
#include "rigid/config.hpp"
#include "rigid/corruptions.hpp"
#include "rigid/detector.hpp"
#include "rigid/manifest.hpp"
#include "rigid/metrics.hpp"
#include "rigid/scoring.hpp"

namespace rigid {

/// Loaded manifests, embedder and output directory shared by the commands.
class Experiment {
 public:
  Experiment(RunConfig config, bool need_real, bool need_fake) : config_(std::move(config)) {
    config_.validate();
    if (need_real && config_.manifest_real.empty()) throw ValidationError("--manifest-real is required");
    if (need_fake && config_.manifest_fake.empty()) throw ValidationError("--manifest-fake is required");
    std::vector<Manifest> parts;
    if (!config_.manifest_real.empty()) parts.push_back(load_manifest(config_.manifest_real));
    if (!config_.manifest_fake.empty()) parts.push_back(load_manifest(config_.manifest_fake));
    if (parts.empty()) throw ValidationError("no manifest given");
    samples_ = merge_manifests(parts);
    if (auto warning = format_mismatch(samples_)) warnings_.push_back(*warning);
    embedder_ = make_embedder(config_.embedder);
    std::filesystem::create_directories(out_dir());
  }

  const RunConfig& config() const { return config_; }
  const Manifest& samples() const { return samples_; }
  const Embedder& embedder() const { return *embedder_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::filesystem::path out_dir() const { return config_.out_dir; }

  ScoringPlan default_plan() const {
    return ScoringPlan{config_.detector, std::nullopt, config_.workers};
  }

  /// Digest of the canonical config with the plan's detector and corruption.
  std::string digest(const ScoringPlan& plan) const {
    RunConfig c = config_;
    c.detector = plan.detector;
    std::string text = c.canonical();
    if (plan.corruption) {
      text += "corruption.kind=" + std::string(to_string(plan.corruption->kind)) + "\n";
      text += "corruption.level=" + detail::fmt_double(plan.corruption->level) + "\n";
      text += "corruption.seed=" + std::to_string(plan.corruption->seed) + "\n";
    }
    return sha256_hex(text);
  }

  /// Scores all samples under `plan`, reusing and extending the cache at
  /// <out>/cache/<digest>.jsonl.
  ScoreRun score(const ScoringPlan& plan) {
    const std::string d = digest(plan);
    ScoreCache cache(out_dir() / "cache" / (d + ".jsonl"), d);
    return score_samples(samples_.entries, *embedder_, config_.embedder, plan, &cache, &prepared_);
  }

  void write_resolved_config() const {
    std::ofstream out(out_dir() / "config.resolved.ini", std::ios::trunc);
    out << config_.to_ini();
  }

 private:
  RunConfig config_;
  Manifest samples_;
  std::unique_ptr<Embedder> embedder_;
  PreparedImages prepared_;
  std::vector<std::string> warnings_;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << text;
}

inline std::string file_safe(std::string name) {
  for (auto& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return name;
}

inline std::string num(double v) { return fmt_double(v); }

inline double mean_similarity(std::span<const ScoreRecord> records, Label label) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.label == label) {
      total += r.similarity;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

}  // namespace detail

/// Shared outcome of every command: artifacts written plus per-sample failures.
struct CommandResult {
  std::vector<std::string> written;
  std::vector<ScoreFailure> failures;
  std::size_t computed = 0;
  std::size_t cached = 0;
};

inline void collect(CommandResult& result, const ScoreRun& run) {
  result.failures.insert(result.failures.end(), run.failures.begin(), run.failures.end());
  result.computed += run.computed;
  result.cached += run.cached;
}

/// `score`: scores.jsonl in manifest order.
inline CommandResult run_score(Experiment& exp) {
  CommandResult result;
  auto run = exp.score(exp.default_plan());
  collect(result, run);
  write_scores_jsonl(exp.out_dir() / "scores.jsonl", run.records);
  exp.write_resolved_config();
  result.written = {"scores.jsonl", "config.resolved.ini"};
  return result;
}

/// `calibrate`: epsilon from real-image similarities only.
inline CommandResult run_calibrate(Experiment& exp, Calibration* out = nullptr) {
  CommandResult result;
  const auto plan = exp.default_plan();
  auto run = exp.score(plan);
  collect(result, run);
  std::vector<double> real;
  for (const auto& r : run.records) {
    if (r.label == Label::kReal) real.push_back(r.similarity);
  }
  const auto cal = calibrate_threshold(real, exp.config().target_tnr);
  nlohmann::ordered_json j;
  j["epsilon"] = cal.epsilon;
  j["target_tnr"] = cal.target_tnr;
  j["achieved_tnr"] = cal.achieved_tnr;
  j["n_real"] = cal.sample_count;
  j["convention"] = Calibration::kConvention;
  j["config_digest"] = exp.digest(plan);
  detail::write_text(exp.out_dir() / "calibration.json", j.dump(2) + "\n");
  exp.write_resolved_config();
  result.written = {"calibration.json", "config.resolved.ini"};
  if (out) *out = cal;
  return result;
}

inline double read_calibration_epsilon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open calibration file: " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j.at("epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad calibration file " + path.string() + ": " + e.what());
  }
}

/// `evaluate`: per-generator AUC/AP against the shared real pool, plus
/// threshold accuracy when an epsilon is available.
inline CommandResult run_evaluate(Experiment& exp, std::optional<double> epsilon,
                                  EvalReport* out = nullptr) {
  CommandResult result;
  const auto plan = exp.default_plan();
  auto run = exp.score(plan);
  collect(result, run);
  write_scores_jsonl(exp.out_dir() / "scores.jsonl", run.records);
  if (!epsilon) epsilon = exp.config().detector.epsilon;
  auto report = evaluate(run.records, epsilon);
  report.config_digest = exp.digest(plan);
  auto j = report.to_json();
  j["n_failed"] = run.failures.size();
  detail::write_text(exp.out_dir() / "report.json", j.dump(2) + "\n");
  detail::write_text(exp.out_dir() / "report.csv", report.to_csv());
  exp.write_resolved_config();
  result.written = {"scores.jsonl", "report.json", "report.csv", "config.resolved.ini"};
  if (out) *out = std::move(report);
  return result;
}

struct RobustnessRow {
  std::string level;  // "none" for the uncorrupted baseline
  EvalReport report;
};

/// `robustness`: baseline plus each corruption level, applied to real and
/// fake images alike. Writes robustness_<generator>_<kind>.csv.
inline CommandResult run_robustness(Experiment& exp, CorruptionKind kind,
                                    std::vector<double> levels = {},
                                    std::vector<RobustnessRow>* out = nullptr) {
  if (levels.empty()) levels = default_corruption_levels(kind);
  CommandResult result;
  std::vector<RobustnessRow> rows;
  {
    auto run = exp.score(exp.default_plan());
    collect(result, run);
    rows.push_back({"none", evaluate(run.records)});
  }
  for (double level : levels) {
    auto plan = exp.default_plan();
    plan.corruption = CorruptionSpec{kind, level, exp.config().corruption_seed};
    auto run = exp.score(plan);
    collect(result, run);
    rows.push_back({detail::num(level), evaluate(run.records)});
  }
  const auto kind_name = std::string(to_string(kind));
  std::vector<std::string> generators;
  for (const auto& [g, _] : rows.front().report.per_generator) generators.push_back(g);
  generators.push_back("average");
  for (const auto& g : generators) {
    std::string csv = "kind,level,auc,ap\n";
    for (const auto& row : rows) {
      const bool avg = g == "average";
      const double auc = avg ? row.report.average_auc : row.report.per_generator.at(g).auc;
      const double ap = avg ? row.report.average_ap : row.report.per_generator.at(g).ap;
      csv += kind_name + "," + row.level + "," + detail::num(auc) + "," + detail::num(ap) + "\n";
    }
    const auto name = "robustness_" + detail::file_safe(g) + "_" + kind_name + ".csv";
    detail::write_text(exp.out_dir() / name, csv);
    result.written.push_back(name);
  }
  if (out) *out = std::move(rows);
  return result;
}

/// Noise intensities 0.00, 0.01, ..., 0.30.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(i / 100.0);
  return grid;
}

struct SweepPoint {
  double lambda = 0.0;
  EvalReport report;
  double mean_similarity_real = 0.0;
  double mean_similarity_fake = 0.0;
};

/// `sweep-lambda`: AUC/AP and mean similarities across noise intensities.
inline CommandResult run_sweep_lambda(Experiment& exp, std::vector<double> lambdas = {},
                                      std::vector<SweepPoint>* out = nullptr) {
  if (lambdas.empty()) lambdas = default_lambda_grid();
  CommandResult result;
  std::vector<SweepPoint> points;
  std::string csv = "lambda,generator,auc,ap,mean_similarity_real,mean_similarity_fake\n";
  for (double lambda : lambdas) {
    auto plan = exp.default_plan();
    plan.detector.noise.lambda = lambda;
    auto run = exp.score(plan);
    collect(result, run);
    SweepPoint p{lambda, evaluate(run.records), detail::mean_similarity(run.records, Label::kReal),
                 detail::mean_similarity(run.records, Label::kFake)};
    for (const auto& [g, m] : p.report.per_generator) {
      csv += detail::num(lambda) + "," + g + "," + detail::num(m.auc) + "," + detail::num(m.ap) + "," +
             detail::num(p.mean_similarity_real) + "," + detail::num(p.mean_similarity_fake) + "\n";
    }
    csv += detail::num(lambda) + ",average," + detail::num(p.report.average_auc) + "," +
           detail::num(p.report.average_ap) + "," + detail::num(p.mean_similarity_real) + "," +
           detail::num(p.mean_similarity_fake) + "\n";
    points.push_back(std::move(p));
  }
  detail::write_text(exp.out_dir() / "sweep_lambda.csv", csv);
  result.written = {"sweep_lambda.csv"};
  if (out) *out = std::move(points);
  return result;
}

/// `ablate-noise`: AP per generator for each noise family at a fixed
/// intensity (default 0.05). One row per distribution plus the average.
inline CommandResult run_ablate_noise(Experiment& exp, std::optional<double> lambda = std::nullopt,
                                      std::map<NoiseDistribution, EvalReport>* out = nullptr) {
  CommandResult result;
  std::map<NoiseDistribution, EvalReport> reports;
  for (auto dist : kAllNoiseDistributions) {
    auto plan = exp.default_plan();
    plan.detector.noise.distribution = dist;
    plan.detector.noise.lambda = lambda.value_or(0.05);
    auto run = exp.score(plan);
    collect(result, run);
    reports.emplace(dist, evaluate(run.records));
  }
  std::string csv = "distribution";
  const auto& first = reports.begin()->second;
  for (const auto& [g, _] : first.per_generator) csv += "," + g;
  csv += ",average\n";
  for (auto dist : kAllNoiseDistributions) {
    const auto& r = reports.at(dist);
    csv += std::string(to_string(dist));
    for (const auto& [g, m] : r.per_generator) csv += "," + detail::num(m.ap);
    csv += "," + detail::num(r.average_ap) + "\n";
  }
  detail::write_text(exp.out_dir() / "sweep_noise.csv", csv);
  result.written = {"sweep_noise.csv"};
  if (out) *out = std::move(reports);
  return result;
}

/// `landscape`: one grid per population present in the manifests.
inline CommandResult run_landscape(Experiment& exp, std::map<Label, LandscapeGrid>* out = nullptr) {
  CommandResult result;
  std::map<Label, std::vector<ImageTensor>> images;
  for (const auto& s : exp.samples().entries) {
    try {
      images[s.label].push_back(load_sample(s, exp.config().embedder, std::nullopt));
    } catch (const std::exception& e) {
      result.failures.push_back({s.id, s.path, e.what()});
    }
  }
  auto opts = exp.config().landscape;
  opts.workers = exp.config().workers;
  const bool both = images.size() > 1;
  for (const auto& [label, xs] : images) {
    auto grid = landscape(xs, exp.embedder().for_label(label), opts);
    const std::string name = both ? "landscape_" + std::string(to_string(label)) + ".csv" : "landscape.csv";
    detail::write_text(exp.out_dir() / name, grid.to_csv());
    result.written.push_back(name);
    if (out) out->emplace(label, std::move(grid));
  }
  return result;
}

}  // namespace rigid
