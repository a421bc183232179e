#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rigid/core.hpp"
#include "rigid/detector.hpp"

namespace rigid {

namespace detail {

struct ClassCounts {
  std::size_t fake = 0;
  std::size_t real = 0;
};

inline ClassCounts check_binary_input(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  ClassCounts counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError("non-finite score");
    (labels[i] == Label::kFake ? counts.fake : counts.real)++;
  }
  if (counts.fake == 0 || counts.real == 0) {
    throw ValidationError("metric needs at least one fake and one real sample");
  }
  return counts;
}

inline std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace detail

/// Area under the ROC curve, fake = positive, higher score = more fake.
/// Mann-Whitney statistic with midranks, so each tied fake/real pair counts 1/2.
inline double roc_auc(std::span<const double> scores, std::span<const Label> labels) {
  const auto counts = detail::check_binary_input(scores, labels);
  const auto idx = detail::order_by_score(scores, /*descending=*/false);
  double fake_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    // 1-based ranks i+1 .. j share their mean.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == Label::kFake) fake_rank_sum += midrank;
    }
    i = j;
  }
  const double nf = static_cast<double>(counts.fake);
  const double nr = static_cast<double>(counts.real);
  const double u = fake_rank_sum - nf * (nf + 1.0) / 2.0;
  return u / (nf * nr);
}

/// Non-interpolated average precision, fake = positive. Walks scores from
/// high to low; all samples sharing a score enter the prediction set together.
inline double average_precision(std::span<const double> scores, std::span<const Label> labels) {
  const auto counts = detail::check_binary_input(scores, labels);
  const auto idx = detail::order_by_score(scores, /*descending=*/true);
  const double nf = static_cast<double>(counts.fake);
  double ap = 0.0;
  std::size_t tp = 0, fp = 0, tp_prev = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == Label::kFake ? tp : fp)++;
      ++j;
    }
    if (tp > tp_prev) {
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += (static_cast<double>(tp - tp_prev) / nf) * precision;
    }
    tp_prev = tp;
    i = j;
  }
  return ap;
}

struct ThresholdAccuracy {
  double accuracy = 0.0;        // (true real + true fake) / all
  double true_positive_rate = 0.0;
};

struct GeneratorMetrics {
  double auc = 0.0;
  double ap = 0.0;
  std::size_t n_fake = 0;
  std::optional<ThresholdAccuracy> threshold;
};

struct EvalReport {
  std::map<std::string, GeneratorMetrics> per_generator;
  std::size_t n_real = 0;
  double average_auc = 0.0;
  double average_ap = 0.0;
  std::optional<double> epsilon_used;
  std::optional<double> true_negative_rate;  // on the real pool, when epsilon is set
  std::string config_digest;

  nlohmann::ordered_json to_json() const;
  std::string to_csv() const;
};

/// AUC/AP of each generator against the shared real pool. Inputs are raw
/// similarities; ranking uses detection_score = 1 - similarity.
inline EvalReport evaluate(std::span<const double> real_similarities,
                           const std::map<std::string, std::vector<double>>& fake_similarities,
                           std::optional<double> epsilon = std::nullopt) {
  if (real_similarities.empty()) throw ValidationError("evaluate: real pool is empty");
  if (fake_similarities.empty()) throw ValidationError("evaluate: no generators");
  EvalReport report;
  report.n_real = real_similarities.size();
  report.epsilon_used = epsilon;
  std::size_t real_correct = 0;
  if (epsilon) {
    for (double s : real_similarities) real_correct += detect(s, epsilon) == Label::kReal;
    report.true_negative_rate = static_cast<double>(real_correct) / static_cast<double>(report.n_real);
  }
  for (const auto& [generator, fakes] : fake_similarities) {
    if (fakes.empty()) throw ValidationError("evaluate: generator '" + generator + "' has no samples");
    std::vector<double> scores;
    std::vector<Label> labels;
    scores.reserve(real_similarities.size() + fakes.size());
    for (double s : real_similarities) {
      scores.push_back(1.0 - s);
      labels.push_back(Label::kReal);
    }
    for (double s : fakes) {
      scores.push_back(1.0 - s);
      labels.push_back(Label::kFake);
    }
    GeneratorMetrics m;
    m.auc = roc_auc(scores, labels);
    m.ap = average_precision(scores, labels);
    m.n_fake = fakes.size();
    if (epsilon) {
      std::size_t fake_correct = 0;
      for (double s : fakes) fake_correct += detect(s, epsilon) == Label::kFake;
      m.threshold = ThresholdAccuracy{
          static_cast<double>(real_correct + fake_correct) /
              static_cast<double>(report.n_real + fakes.size()),
          static_cast<double>(fake_correct) / static_cast<double>(fakes.size())};
    }
    report.average_auc += m.auc;
    report.average_ap += m.ap;
    report.per_generator.emplace(generator, m);
  }
  const double g = static_cast<double>(report.per_generator.size());
  report.average_auc /= g;
  report.average_ap /= g;
  return report;
}

/// Groups score records by label and generator, then evaluates.
inline EvalReport evaluate(std::span<const ScoreRecord> records,
                           std::optional<double> epsilon = std::nullopt) {
  std::vector<double> real;
  std::map<std::string, std::vector<double>> fake;
  for (const auto& r : records) {
    if (r.label == Label::kReal) {
      real.push_back(r.similarity);
    } else {
      fake[r.generator].push_back(r.similarity);
    }
  }
  return evaluate(real, fake, epsilon);
}

inline nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["n_real"] = n_real;
  j["average_auc"] = average_auc;
  j["average_ap"] = average_ap;
  j["epsilon_used"] = epsilon_used ? nlohmann::ordered_json(*epsilon_used) : nlohmann::ordered_json(nullptr);
  j["true_negative_rate"] = true_negative_rate ? nlohmann::ordered_json(*true_negative_rate) : nlohmann::ordered_json(nullptr);
  j["threshold_convention"] = Calibration::kConvention;
  auto& gens = j["per_generator"] = nlohmann::ordered_json::object();
  for (const auto& [name, m] : per_generator) {
    nlohmann::ordered_json g;
    g["auc"] = m.auc;
    g["ap"] = m.ap;
    g["n_fake"] = m.n_fake;
    if (m.threshold) {
      g["threshold_accuracy"] = m.threshold->accuracy;
      g["true_positive_rate"] = m.threshold->true_positive_rate;
    } else {
      g["threshold_accuracy"] = nullptr;
      g["true_positive_rate"] = nullptr;
    }
    gens[name] = g;
  }
  j["config_digest"] = config_digest;
  return j;
}

inline std::string EvalReport::to_csv() const {
  std::string out = "generator,auc,ap,n\n";
  for (const auto& [name, m] : per_generator) {
    out += name + "," + format_double(m.auc) + "," + format_double(m.ap) + "," + std::to_string(m.n_fake) + "\n";
  }
  std::size_t total = 0;
  for (const auto& [_, m] : per_generator) total += m.n_fake;
  out += "average," + format_double(average_auc) + "," + format_double(average_ap) + "," + std::to_string(total) + "\n";
  return out;
}

}  // namespace rigid
