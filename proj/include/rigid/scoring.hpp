#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rigid/core.hpp"
#include "rigid/corruptions.hpp"
#include "rigid/detector.hpp"
#include "rigid/embedder.hpp"
#include "rigid/image_io.hpp"
#include "rigid/parallel.hpp"
#include "rigid/random.hpp"

namespace rigid {

inline nlohmann::ordered_json to_json(const ScoreRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.sample_id;
  j["label"] = to_string(r.label);
  j["generator"] = r.generator;
  j["similarity"] = r.similarity;
  j["detection_score"] = r.detection_score;
  return j;
}

inline ScoreRecord score_record_from_json(const nlohmann::json& j) {
  return ScoreRecord::make(j.at("id").get<std::string>(), j.at("similarity").get<double>(),
                           parse_label(j.at("label").get<std::string>()),
                           j.at("generator").get<std::string>());
}

inline void write_scores_jsonl(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<ScoreRecord> read_scores_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scores file: " + path.string());
  std::vector<ScoreRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(score_record_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

/// Append-only JSON-lines store of finished scores for one config digest.
/// Lines that fail to parse (e.g. a torn final write) are ignored on load.
class ScoreCache {
 public:
  ScoreCache() = default;

  ScoreCache(std::filesystem::path path, std::string digest)
      : path_(std::move(path)), digest_(std::move(digest)) {
    std::filesystem::create_directories(path_.parent_path());
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
      try {
        auto j = nlohmann::json::parse(line);
        if (j.value("digest", "") != digest_) continue;
        auto r = score_record_from_json(j);
        entries_[r.sample_id] = std::move(r);
      } catch (const std::exception&) {
        continue;
      }
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw RuntimeError("cannot open score cache " + path_.string());
  }

  bool enabled() const { return !path_.empty(); }

  std::optional<ScoreRecord> find(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void append(const ScoreRecord& r) {
    if (!enabled()) return;
    auto j = to_json(r);
    j["digest"] = digest_;
    std::lock_guard lock(mutex_);
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::filesystem::path path_;
  std::string digest_;
  std::map<std::string, ScoreRecord> entries_;
  std::ofstream out_;
  std::mutex mutex_;
};

struct ScoringPlan {
  DetectorConfig detector;
  std::optional<CorruptionSpec> corruption;
  int workers = 1;
};

struct ScoreFailure {
  std::string id;
  std::string path;
  std::string error;
};

struct ScoreRun {
  std::vector<ScoreRecord> records;  // input order, failures omitted
  std::vector<ScoreFailure> failures;
  std::size_t computed = 0;
  std::size_t cached = 0;
};

/// Memo of preprocessed tensors keyed by sample id; reused across runs that
/// differ only in detector settings.
class PreparedImages {
 public:
  std::optional<ImageTensor> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = images_.find(id);
    if (it == images_.end()) return std::nullopt;
    return it->second;
  }
  void insert(const std::string& id, const ImageTensor& x) {
    std::lock_guard lock(mutex_);
    images_.emplace(id, x);
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, ImageTensor> images_;
};

/// Decode -> optional corruption -> preprocess. Corruption noise is keyed by
/// the sample id.
inline ImageTensor load_sample(const SampleRecord& sample, const EmbedderConfig& config,
                               const std::optional<CorruptionSpec>& corruption) {
  ImageTensor full = to_tensor(read_image(sample.path));
  if (corruption) full = corrupt(full, *corruption, stable_hash(sample.id));
  return preprocess(full, config);
}

/// Scores every sample; per-sample errors are recorded and skipped. Noise
/// for a sample depends only on (detector seed, sample id, draw index), so
/// results do not depend on ordering or worker count.
inline ScoreRun score_samples(std::span<const SampleRecord> samples, const Embedder& embedder,
                              const EmbedderConfig& embedder_config, const ScoringPlan& plan,
                              ScoreCache* cache = nullptr, PreparedImages* prepared = nullptr) {
  plan.detector.validate();
  if (plan.corruption) plan.corruption->validate();
  std::vector<std::optional<ScoreRecord>> slots(samples.size());
  std::vector<std::optional<ScoreFailure>> errors(samples.size());
  std::atomic<std::size_t> computed{0}, cached{0};

  parallel_for(samples.size(), plan.workers, [&](std::size_t i) {
    const auto& s = samples[i];
    if (cache) {
      if (auto hit = cache->find(s.id)) {
        slots[i] = *hit;
        ++cached;
        return;
      }
    }
    try {
      std::optional<ImageTensor> x;
      if (prepared && !plan.corruption) x = prepared->find(s.id);
      if (!x) {
        x = load_sample(s, embedder_config, plan.corruption);
        if (prepared && !plan.corruption) prepared->insert(s.id, *x);
      }
      const double sim = similarity_score(*x, embedder.for_label(s.label), plan.detector, stable_hash(s.id));
      auto record = ScoreRecord::make(s.id, sim, s.label, s.generator);
      if (cache) cache->append(record);
      slots[i] = std::move(record);
      ++computed;
    } catch (const std::exception& e) {
      errors[i] = ScoreFailure{s.id, s.path, e.what()};
    }
  });

  ScoreRun run;
  run.computed = computed;
  run.cached = cached;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (slots[i]) run.records.push_back(std::move(*slots[i]));
    if (errors[i]) run.failures.push_back(std::move(*errors[i]));
  }
  return run;
}

}  // namespace rigid
