#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "rigid/core.hpp"
#include "rigid/detector.hpp"
#include "rigid/embedder.hpp"
#include "rigid/parallel.hpp"

namespace rigid {

/// Everything a run depends on. Loaded from an INI document with sections
/// [embedder], [detector], [run] and [landscape]; relative paths resolve
/// against the config file's directory.
struct RunConfig {
  EmbedderConfig embedder;
  DetectorConfig detector;
  std::string manifest_real;
  std::string manifest_fake;
  std::string out_dir = "out";
  double target_tnr = 0.95;
  int workers = default_workers();
  std::uint64_t corruption_seed = 0;
  LandscapeOptions landscape;

  void validate() const {
    embedder.validate();
    detector.validate();
    if (!(target_tnr > 0.0 && target_tnr < 1.0)) throw ValidationError("target_tnr must lie in (0,1)");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    grid_axis(landscape.alpha_min, landscape.alpha_max, landscape.step);
    grid_axis(landscape.beta_min, landscape.beta_max, landscape.step);
  }

  /// Fields that influence scores, one `section.key=value` per line in fixed
  /// order. The output directory and worker count are excluded.
  std::string canonical() const;

  /// Resolved, re-loadable INI text (includes out and workers).
  std::string to_ini() const;

  static RunConfig from_ini(std::istream& in, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Overlays geometry/normalization from a preprocessing sidecar JSON.
  void apply_preprocess_json(const std::filesystem::path& path);
};

namespace detail {

inline std::string fmt_double(double v) { return format_double(v); }

inline std::string fmt_triple(const std::array<double, 3>& v) {
  return fmt_double(v[0]) + "," + fmt_double(v[1]) + "," + fmt_double(v[2]);
}

inline std::array<double, 3> parse_triple(const std::string& text, const std::string& key) {
  std::array<double, 3> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) break;
    try {
      out[i++] = std::stod(item);
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "': bad number '" + item + "'");
    }
  }
  if (i != 3) throw ValidationError("config key '" + key + "' needs three comma-separated numbers");
  return out;
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty()) return p;
  std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw RuntimeError("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

inline std::string RunConfig::canonical() const {
  using detail::fmt_double;
  const auto& e = embedder;
  const auto& d = detector;
  std::ostringstream out;
  out << "format=rigid-run-v1\n"
      << "embedder.kind=" << to_string(e.kind) << '\n'
      << "embedder.model_path=" << e.model_path << '\n'
      << "embedder.input_size=" << e.input_size << '\n'
      << "embedder.resize_short_side=" << e.resize_short_side << '\n'
      << "embedder.norm_mean=" << detail::fmt_triple(e.norm_mean) << '\n'
      << "embedder.norm_std=" << detail::fmt_triple(e.norm_std) << '\n'
      << "embedder.embedding_dim=" << e.embedding_dim << '\n'
      << "embedder.pooling=" << to_string(e.pooling) << '\n'
      << "embedder.batch_size=" << e.batch_size << '\n'
      << "embedder.synthetic_input_dim=" << e.synthetic_input_dim << '\n'
      << "embedder.rff_k_real=" << fmt_double(e.rff_k_real) << '\n'
      << "embedder.rff_k_fake=" << fmt_double(e.rff_k_fake) << '\n'
      << "embedder.synthetic_seed=" << e.synthetic_seed << '\n'
      << "detector.distribution=" << to_string(d.noise.distribution) << '\n'
      << "detector.lambda=" << fmt_double(d.noise.lambda) << '\n'
      << "detector.seed=" << d.noise.seed << '\n'
      << "detector.num_noise_samples=" << d.num_noise_samples << '\n'
      << "detector.epsilon=" << (d.epsilon ? fmt_double(*d.epsilon) : "") << '\n'
      << "run.manifest_real=" << manifest_real << '\n'
      << "run.manifest_fake=" << manifest_fake << '\n'
      << "run.target_tnr=" << fmt_double(target_tnr) << '\n'
      << "run.corruption_seed=" << corruption_seed << '\n'
      << "landscape.alpha_min=" << fmt_double(landscape.alpha_min) << '\n'
      << "landscape.alpha_max=" << fmt_double(landscape.alpha_max) << '\n'
      << "landscape.beta_min=" << fmt_double(landscape.beta_min) << '\n'
      << "landscape.beta_max=" << fmt_double(landscape.beta_max) << '\n'
      << "landscape.step=" << fmt_double(landscape.step) << '\n'
      << "landscape.direction_seed=" << landscape.direction_seed << '\n';
  return out.str();
}

inline std::string RunConfig::to_ini() const {
  using detail::fmt_double;
  const auto& e = embedder;
  const auto& d = detector;
  std::ostringstream out;
  out << "[embedder]\n"
      << "kind = " << to_string(e.kind) << '\n'
      << "model_path = " << e.model_path << '\n'
      << "input_size = " << e.input_size << '\n'
      << "resize_short_side = " << e.resize_short_side << '\n'
      << "norm_mean = " << detail::fmt_triple(e.norm_mean) << '\n'
      << "norm_std = " << detail::fmt_triple(e.norm_std) << '\n'
      << "embedding_dim = " << e.embedding_dim << '\n'
      << "pooling = " << to_string(e.pooling) << '\n'
      << "batch_size = " << e.batch_size << '\n'
      << "synthetic_input_dim = " << e.synthetic_input_dim << '\n'
      << "rff_k_real = " << fmt_double(e.rff_k_real) << '\n'
      << "rff_k_fake = " << fmt_double(e.rff_k_fake) << '\n'
      << "synthetic_seed = " << e.synthetic_seed << '\n'
      << "\n[detector]\n"
      << "distribution = " << to_string(d.noise.distribution) << '\n'
      << "lambda = " << fmt_double(d.noise.lambda) << '\n'
      << "seed = " << d.noise.seed << '\n'
      << "num_noise_samples = " << d.num_noise_samples << '\n'
      << "epsilon = " << (d.epsilon ? fmt_double(*d.epsilon) : "") << '\n'
      << "\n[run]\n"
      << "manifest_real = " << manifest_real << '\n'
      << "manifest_fake = " << manifest_fake << '\n'
      << "out = " << out_dir << '\n'
      << "target_tnr = " << fmt_double(target_tnr) << '\n'
      << "workers = " << workers << '\n'
      << "corruption_seed = " << corruption_seed << '\n'
      << "\n[landscape]\n"
      << "alpha_min = " << fmt_double(landscape.alpha_min) << '\n'
      << "alpha_max = " << fmt_double(landscape.alpha_max) << '\n'
      << "beta_min = " << fmt_double(landscape.beta_min) << '\n'
      << "beta_max = " << fmt_double(landscape.beta_max) << '\n'
      << "step = " << fmt_double(landscape.step) << '\n'
      << "direction_seed = " << landscape.direction_seed << '\n';
  return out.str();
}

inline RunConfig RunConfig::from_ini(std::istream& in, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }

  RunConfig cfg;
  std::string preprocess_json;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ValidationError("config key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, node] : body) {
      const std::string value = node.data();
      const std::string name = section + "." + key;
      auto as_int = [&]() -> long long {
        try {
          std::size_t used = 0;
          long long v = std::stoll(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
          return v;
        } catch (const std::exception&) {
          throw ValidationError("config key '" + name + "': expected integer, got '" + value + "'");
        }
      };
      auto as_u64 = [&]() -> std::uint64_t {
        try {
          std::size_t used = 0;
          unsigned long long v = std::stoull(value, &used);
          if (used != value.size() || value.starts_with('-')) throw std::invalid_argument(value);
          return v;
        } catch (const std::exception&) {
          throw ValidationError("config key '" + name + "': expected unsigned integer, got '" + value + "'");
        }
      };
      auto as_double = [&]() -> double {
        try {
          std::size_t used = 0;
          double v = std::stod(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
          return v;
        } catch (const std::exception&) {
          throw ValidationError("config key '" + name + "': expected number, got '" + value + "'");
        }
      };

      auto& e = cfg.embedder;
      auto& d = cfg.detector;
      auto& l = cfg.landscape;
      if (name == "embedder.kind") e.kind = parse_embedder_kind(value);
      else if (name == "embedder.model_path") e.model_path = detail::resolve_path(value, base_dir);
      else if (name == "embedder.preprocess") preprocess_json = detail::resolve_path(value, base_dir);
      else if (name == "embedder.input_size") e.input_size = static_cast<int>(as_int());
      else if (name == "embedder.resize_short_side") e.resize_short_side = static_cast<int>(as_int());
      else if (name == "embedder.norm_mean") e.norm_mean = detail::parse_triple(value, name);
      else if (name == "embedder.norm_std") e.norm_std = detail::parse_triple(value, name);
      else if (name == "embedder.embedding_dim") e.embedding_dim = static_cast<int>(as_int());
      else if (name == "embedder.pooling") e.pooling = parse_pooling(value);
      else if (name == "embedder.batch_size") e.batch_size = static_cast<int>(as_int());
      else if (name == "embedder.synthetic_input_dim") e.synthetic_input_dim = static_cast<int>(as_int());
      else if (name == "embedder.rff_k_real") e.rff_k_real = as_double();
      else if (name == "embedder.rff_k_fake") e.rff_k_fake = as_double();
      else if (name == "embedder.synthetic_seed") e.synthetic_seed = as_u64();
      else if (name == "detector.distribution") d.noise.distribution = parse_noise_distribution(value);
      else if (name == "detector.lambda") d.noise.lambda = as_double();
      else if (name == "detector.seed") d.noise.seed = as_u64();
      else if (name == "detector.num_noise_samples") d.num_noise_samples = static_cast<int>(as_int());
      else if (name == "detector.epsilon") {
        if (value.empty()) d.epsilon.reset();
        else d.epsilon = as_double();
      }
      else if (name == "run.manifest_real") cfg.manifest_real = detail::resolve_path(value, base_dir);
      else if (name == "run.manifest_fake") cfg.manifest_fake = detail::resolve_path(value, base_dir);
      else if (name == "run.out") cfg.out_dir = detail::resolve_path(value, base_dir);
      else if (name == "run.target_tnr") cfg.target_tnr = as_double();
      else if (name == "run.workers") cfg.workers = static_cast<int>(as_int());
      else if (name == "run.corruption_seed") cfg.corruption_seed = as_u64();
      else if (name == "landscape.alpha_min") l.alpha_min = as_double();
      else if (name == "landscape.alpha_max") l.alpha_max = as_double();
      else if (name == "landscape.beta_min") l.beta_min = as_double();
      else if (name == "landscape.beta_max") l.beta_max = as_double();
      else if (name == "landscape.step") l.step = as_double();
      else if (name == "landscape.direction_seed") l.direction_seed = as_u64();
      else throw ValidationError("unknown config key '" + name + "'");
    }
  }
  if (!preprocess_json.empty()) cfg.apply_preprocess_json(preprocess_json);
  return cfg;
}

inline RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path.string());
  return from_ini(in, path.parent_path());
}

inline void RunConfig::apply_preprocess_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open preprocessing config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    auto& e = embedder;
    e.input_size = j.at("input_size").get<int>();
    e.resize_short_side = j.at("resize_short_side").get<int>();
    e.norm_mean = j.at("norm_mean").get<std::array<double, 3>>();
    e.norm_std = j.at("norm_std").get<std::array<double, 3>>();
    e.embedding_dim = j.at("embedding_dim").get<int>();
    e.pooling = parse_pooling(j.at("pooling").get<std::string>());
    if (j.contains("model") && e.model_path.empty()) {
      e.model_path = detail::resolve_path(j["model"].get<std::string>(), path.parent_path());
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("preprocessing config " + path.string() + ": " + ex.what());
  }
}

}  // namespace rigid
