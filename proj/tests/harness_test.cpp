#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "rigid/rigid.hpp"

namespace rigid {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("rigid_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig fixture_config(const FixtureFiles& files, const fs::path& out) {
  RunConfig cfg = RunConfig::load(files.config);
  cfg.out_dir = out.string();
  return cfg;
}

SyntheticDatasetSpec small_spec() {
  SyntheticDatasetSpec spec;
  spec.n_real = 24;
  spec.n_fake = 24;
  spec.embedding_dim = 512;
  return spec;
}

// ---- manifest ----

TEST(Manifest, ParsesQuotedFieldsAndOptionalId) {
  auto m = parse_manifest(
      "\xEF\xBB\xBFpath,label,generator\n"
      "\"a, b.png\",real,real\n"
      "c.png,fake,sd\n",
      "/data");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].path, "a, b.png");
  EXPECT_EQ(m.entries[0].id, "a, b.png");
  EXPECT_EQ(m.entries[1].label, Label::kFake);
  EXPECT_EQ(m.resolve(m.entries[1]), fs::path("/data/c.png"));
}

TEST(Manifest, Rejections) {
  EXPECT_THROW(parse_manifest("path,label,generator\n"), ValidationError);
  EXPECT_THROW(parse_manifest(""), ValidationError);
  EXPECT_THROW(parse_manifest("path,label\na.png,real\n"), ValidationError);
  EXPECT_THROW(parse_manifest("path,label,generator\na.png,real,sd\n"), ValidationError);
  EXPECT_THROW(parse_manifest("path,label,generator\na.png,fake,real\n"), ValidationError);
  EXPECT_THROW(parse_manifest("path,label,generator\na.png,maybe,real\n"), ValidationError);
  try {
    parse_manifest("id,path,label,generator\nx,a.png,real,real\nx,b.png,real,real\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Manifest, MissingFilesAreListed) {
  TempDir tmp;
  std::ofstream(tmp.path() / "m.csv") << "id,path,label,generator\nq,nowhere.png,real,real\n";
  try {
    load_manifest(tmp.path() / "m.csv");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere.png"), std::string::npos);
  }
  EXPECT_NO_THROW(load_manifest(tmp.path() / "m.csv", false));
}

TEST(Manifest, FormatMismatchWarning) {
  auto same = parse_manifest("path,label,generator\na.png,real,real\nb.PNG,fake,g\n");
  EXPECT_FALSE(format_mismatch(same));
  auto mixed = parse_manifest("path,label,generator\na.jpeg,real,real\nb.png,fake,g\n");
  auto w = format_mismatch(mixed);
  ASSERT_TRUE(w);
  EXPECT_NE(w->find(".jpg"), std::string::npos);
  EXPECT_NE(w->find(".png"), std::string::npos);
}

TEST(Manifest, MergeKeepsIdsUnique) {
  auto a = parse_manifest("id,path,label,generator\nx,a.png,real,real\n", "/r");
  auto b = parse_manifest("id,path,label,generator\nx,b.png,fake,g\n", "/f");
  EXPECT_THROW(merge_manifests({a, b}), ValidationError);
  auto c = parse_manifest("id,path,label,generator\ny,b.png,fake,g\n", "/f");
  auto merged = merge_manifests({a, c});
  EXPECT_EQ(merged.entries[1].path, "/f/b.png");
}

// ---- config ----

TEST(Config, IniRoundTrip) {
  RunConfig cfg;
  cfg.detector.noise.lambda = 0.07;
  cfg.detector.noise.distribution = NoiseDistribution::kLaplace;
  cfg.detector.epsilon = 0.91;
  cfg.embedder.norm_mean = {0.1, 0.2, 0.3};
  cfg.manifest_real = "/abs/real.csv";
  cfg.workers = 3;
  std::istringstream in(cfg.to_ini());
  auto back = RunConfig::from_ini(in);
  EXPECT_EQ(back.to_ini(), cfg.to_ini());
  EXPECT_EQ(back.canonical(), cfg.canonical());
}

TEST(Config, UnknownKeyAndBadValuesRejected) {
  std::istringstream unknown("[detector]\nlambada = 0.1\n");
  EXPECT_THROW(RunConfig::from_ini(unknown), ValidationError);
  std::istringstream bad("[detector]\nlambda = 0.1x\n");
  EXPECT_THROW(RunConfig::from_ini(bad), ValidationError);
  RunConfig cfg;
  cfg.detector.noise.lambda = -0.1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
  std::istringstream in("[run]\nmanifest_real = sub/real.csv\nout = results\n");
  auto cfg = RunConfig::from_ini(in, "/base");
  EXPECT_EQ(cfg.manifest_real, "/base/sub/real.csv");
  EXPECT_EQ(cfg.out_dir, "/base/results");
}

TEST(Config, CanonicalDigestTracksScoringFieldsOnly) {
  RunConfig a;
  RunConfig b = a;
  b.out_dir = "elsewhere";
  b.workers = a.workers + 5;
  EXPECT_EQ(sha256_hex(a.canonical()), sha256_hex(b.canonical()));
  b.detector.noise.seed = 1;
  EXPECT_NE(sha256_hex(a.canonical()), sha256_hex(b.canonical()));
}

TEST(Config, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, PreprocessSidecar) {
  std::istringstream in("[embedder]\nkind = model_file\npreprocess = tiny_preprocess.json\n");
  auto cfg = RunConfig::from_ini(in, RIGID_TEST_DATA_DIR);
  EXPECT_EQ(cfg.embedder.input_size, 8);
  EXPECT_EQ(cfg.embedder.embedding_dim, 16);
  EXPECT_EQ(fs::path(cfg.embedder.model_path), fs::path(RIGID_TEST_DATA_DIR) / "tiny_linear.onnx");
  EXPECT_NO_THROW(cfg.validate());
}

// ---- scoring ----

TEST(ScoreRecords, JsonLinesRoundTrip) {
  TempDir tmp;
  std::vector<ScoreRecord> records{ScoreRecord::make("a", 0.25, Label::kReal, "real"),
                                   ScoreRecord::make("b", 0.1 + 0.2, Label::kFake, "g")};
  write_scores_jsonl(tmp.path() / "s.jsonl", records);
  auto back = read_scores_jsonl(tmp.path() / "s.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].similarity, 0.1 + 0.2);
  EXPECT_EQ(back[1].detection_score, 1.0 - (0.1 + 0.2));
  EXPECT_EQ(back[0].label, Label::kReal);
}

TEST(Scoring, CacheMakesRerunComputeNothing) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  Experiment first(fixture_config(files, tmp.path() / "out"), true, true);
  auto run1 = first.score(first.default_plan());
  EXPECT_EQ(run1.computed, 48u);
  Experiment second(fixture_config(files, tmp.path() / "out"), true, true);
  auto run2 = second.score(second.default_plan());
  EXPECT_EQ(run2.computed, 0u);
  EXPECT_EQ(run2.cached, 48u);
  ASSERT_EQ(run1.records.size(), run2.records.size());
  for (std::size_t i = 0; i < run1.records.size(); ++i) {
    EXPECT_EQ(run1.records[i].similarity, run2.records[i].similarity);
  }
  // A different seed is a different digest.
  auto plan = second.default_plan();
  plan.detector.noise.seed += 1;
  EXPECT_EQ(second.score(plan).computed, 48u);
}

TEST(Scoring, TornCacheLineIsIgnored) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  exp.score(exp.default_plan());
  const auto cache = tmp.path() / "out" / "cache" / (exp.digest(exp.default_plan()) + ".jsonl");
  ASSERT_TRUE(fs::exists(cache));
  std::ofstream(cache, std::ios::app) << "{\"id\":\"real_000";
  Experiment again(fixture_config(files, tmp.path() / "out"), true, true);
  EXPECT_EQ(again.score(again.default_plan()).cached, 48u);
}

TEST(Scoring, ZeroLambdaGivesUnitSimilarity) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  auto cfg = fixture_config(files, tmp.path() / "out");
  cfg.detector.noise.lambda = 0.0;
  Experiment exp(cfg, true, true);
  for (const auto& r : exp.score(exp.default_plan()).records) {
    EXPECT_EQ(r.similarity, 1.0);
    EXPECT_EQ(r.detection_score, 0.0);
  }
}

TEST(Scoring, UndecodableImageIsIsolated) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  std::ofstream(tmp.path() / "fx" / "images" / "fake_00003.png", std::ios::trunc) << "not an image";
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  auto run = exp.score(exp.default_plan());
  ASSERT_EQ(run.failures.size(), 1u);
  EXPECT_EQ(run.failures[0].id, "fake_00003");
  EXPECT_EQ(run.records.size(), 47u);
}

TEST(Scoring, IndependentOfWorkerCount) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  auto cfg1 = fixture_config(files, tmp.path() / "o1");
  cfg1.workers = 1;
  auto cfg4 = fixture_config(files, tmp.path() / "o4");
  cfg4.workers = 4;
  Experiment e1(cfg1, true, true), e4(cfg4, true, true);
  run_evaluate(e1, std::nullopt);
  run_evaluate(e4, std::nullopt);
  EXPECT_EQ(slurp(tmp.path() / "o1" / "scores.jsonl"), slurp(tmp.path() / "o4" / "scores.jsonl"));
  EXPECT_EQ(slurp(tmp.path() / "o1" / "report.json"), slurp(tmp.path() / "o4" / "report.json"));
}

// ---- experiments ----

TEST(Experiments, CalibrateThenEvaluate) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = 40;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  Calibration cal;
  run_calibrate(exp, &cal);
  const double eps = read_calibration_epsilon(tmp.path() / "out" / "calibration.json");
  EXPECT_EQ(eps, cal.epsilon);
  EXPECT_GE(cal.achieved_tnr, 0.95);
  run_evaluate(exp, eps);
  auto report = nlohmann::json::parse(slurp(tmp.path() / "out" / "report.json"));
  EXPECT_EQ(report["epsilon_used"].get<double>(), eps);
  EXPECT_FALSE(report["true_negative_rate"].is_null());
  EXPECT_EQ(report["config_digest"].get<std::string>().size(), 64u);
}

TEST(Experiments, EvaluateWithoutCalibrationHasNullThresholdFields) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  run_evaluate(exp, std::nullopt);
  auto report = nlohmann::json::parse(slurp(tmp.path() / "out" / "report.json"));
  EXPECT_TRUE(report["epsilon_used"].is_null());
  EXPECT_TRUE(report["per_generator"]["rff"]["threshold_accuracy"].is_null());
  EXPECT_NE(slurp(tmp.path() / "out" / "report.csv").find("average,"), std::string::npos);
}

TEST(Experiments, CalibrationNeedsEnoughReals) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = 5;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, false);
  EXPECT_THROW(run_calibrate(exp), ValidationError);
}

TEST(Experiments, SweepLambdaDefaultGrid) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = spec.n_fake = 6;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  std::vector<SweepPoint> points;
  run_sweep_lambda(exp, {}, &points);
  ASSERT_EQ(points.size(), 31u);
  EXPECT_EQ(points.front().lambda, 0.0);
  EXPECT_EQ(points.front().report.average_auc, 0.5);
  EXPECT_NEAR(points.back().lambda, 0.30, 1e-15);
  std::istringstream csv(slurp(tmp.path() / "out" / "sweep_lambda.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1 + 31 * 2);
}

TEST(Experiments, AblateNoiseHasOneRowPerFamily) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = spec.n_fake = 6;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  std::map<NoiseDistribution, EvalReport> reports;
  run_ablate_noise(exp, std::nullopt, &reports);
  EXPECT_EQ(reports.size(), 4u);
  std::istringstream csv(slurp(tmp.path() / "out" / "sweep_noise.csv"));
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header.rfind("distribution,", 0), 0u);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(Experiments, RobustnessWritesBaselineAndLevels) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = spec.n_fake = 6;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  std::vector<RobustnessRow> rows;
  run_robustness(exp, CorruptionKind::kGaussianBlur, default_corruption_levels(CorruptionKind::kGaussianBlur),
                 &rows);
  EXPECT_EQ(rows.size(), 6u);
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "robustness_rff_gaussian_blur.csv"));
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "robustness_average_gaussian_blur.csv"));
}

TEST(Experiments, LandscapePerPopulation) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = spec.n_fake = 2;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  auto cfg = fixture_config(files, tmp.path() / "out");
  cfg.landscape.step = 0.25;
  Experiment exp(cfg, true, true);
  std::map<Label, LandscapeGrid> grids;
  run_landscape(exp, &grids);
  ASSERT_EQ(grids.size(), 2u);
  EXPECT_EQ(grids.at(Label::kReal).at(2, 2), 1.0);
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "landscape_real.csv"));
  EXPECT_TRUE(fs::exists(tmp.path() / "out" / "landscape_fake.csv"));
}

TEST(Experiments, FormatMismatchSurfacesAsWarning) {
  TempDir tmp;
  auto files = generate_fixture(small_spec(), tmp.path() / "fx");
  std::ofstream(tmp.path() / "fx" / "odd.csv") << "id,path,label,generator\nz,images/real_00000.png,real,real\n";
  fs::copy_file(tmp.path() / "fx" / "images" / "real_00000.png", tmp.path() / "fx" / "images" / "x.jpg");
  std::ofstream(tmp.path() / "fx" / "odd_fake.csv") << "id,path,label,generator\nw,images/x.jpg,fake,g\n";
  auto cfg = fixture_config(files, tmp.path() / "out");
  cfg.manifest_real = (tmp.path() / "fx" / "odd.csv").string();
  cfg.manifest_fake = (tmp.path() / "fx" / "odd_fake.csv").string();
  Experiment exp(cfg, true, true);
  EXPECT_EQ(exp.warnings().size(), 1u);
}

// ---- fixtures ----

TEST(Fixtures, ByteIdenticalForIdenticalSpecs) {
  TempDir tmp;
  auto spec = small_spec();
  generate_fixture(spec, tmp.path() / "a");
  generate_fixture(spec, tmp.path() / "b");
  for (const auto& entry : fs::recursive_directory_iterator(tmp.path() / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), tmp.path() / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(tmp.path() / "b" / rel)) << rel;
  }
}

TEST(Fixtures, PipelineMatchesExpectations) {
  TempDir tmp;
  auto spec = small_spec();
  spec.n_real = spec.n_fake = 60;
  spec.embedding_dim = 2048;
  spec.lambda = 0.25;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  auto expected = nlohmann::json::parse(slurp(files.expectations));
  Experiment exp(fixture_config(files, tmp.path() / "out"), true, true);
  auto run = exp.score(exp.default_plan());
  const double tol = expected["tolerance"].get<double>();
  EXPECT_NEAR(detail::mean_similarity(run.records, Label::kReal),
              expected["expected_similarity_real"].get<double>(), tol);
  EXPECT_NEAR(detail::mean_similarity(run.records, Label::kFake),
              expected["expected_similarity_fake"].get<double>(), tol);
}

TEST(Fixtures, EqualScalesExpectChanceAuc) {
  TempDir tmp;
  auto spec = small_spec();
  spec.k_fake = spec.k_real;
  auto files = generate_fixture(spec, tmp.path() / "fx");
  auto expected = nlohmann::json::parse(slurp(files.expectations));
  EXPECT_EQ(expected["expected_auc"].get<double>(), 0.5);
  spec.k_fake = spec.k_real / 2;
  EXPECT_THROW(spec.validate(), ValidationError);
}

}  // namespace
}  // namespace rigid
