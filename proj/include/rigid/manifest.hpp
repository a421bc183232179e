#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rigid/core.hpp"

namespace rigid {

struct Manifest {
  std::vector<SampleRecord> entries;
  std::filesystem::path root;

  std::filesystem::path resolve(const SampleRecord& r) const {
    std::filesystem::path p(r.path);
    return p.is_absolute() ? p : root / p;
  }
};

namespace detail {

// One CSV record; double quotes may wrap fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) {
    throw ValidationError("manifest line " + std::to_string(line_no) + ": unterminated quote");
  }
  return fields;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Parses manifest CSV text. Header must name `path`, `label` and
/// `generator`; an `id` column is optional and defaults to the path.
inline Manifest parse_manifest(std::string_view text, std::filesystem::path root = {}) {
  Manifest m;
  m.root = std::move(root);
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> columns;
  std::set<std::string> seen;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line, line_no);
    for (auto& f : fields) f = detail::trim(f);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) columns[fields[i]] = i;
      for (const char* required : {"path", "label", "generator"}) {
        if (!columns.contains(required)) {
          throw ValidationError("manifest line " + std::to_string(line_no) +
                                ": header lacks column '" + required + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != columns.size()) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": expected " +
                            std::to_string(columns.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    SampleRecord r;
    r.path = fields[columns["path"]];
    r.generator = fields[columns["generator"]];
    r.id = columns.contains("id") ? fields[columns["id"]] : r.path;
    if (r.path.empty()) throw ValidationError("manifest line " + std::to_string(line_no) + ": empty path");
    if (r.id.empty()) throw ValidationError("manifest line " + std::to_string(line_no) + ": empty id");
    try {
      r.label = parse_label(fields[columns["label"]]);
    } catch (const ValidationError& e) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if ((r.label == Label::kReal) != (r.generator == "real")) {
      throw ValidationError("manifest line " + std::to_string(line_no) +
                            ": label 'real' requires generator 'real' and vice versa");
    }
    if (!seen.insert(r.id).second) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
    }
    m.entries.push_back(std::move(r));
  }
  if (m.entries.empty()) throw ValidationError("empty manifest");
  return m;
}

/// Loads a manifest file; relative image paths resolve against its directory.
/// Fails listing every entry whose file is missing when `check_files` is set.
inline Manifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open manifest: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Manifest m = parse_manifest(buf.str(), path.parent_path());
  if (check_files) {
    std::string missing;
    std::size_t count = 0;
    for (const auto& r : m.entries) {
      if (!std::filesystem::exists(m.resolve(r))) {
        if (count < 20) missing += "\n  " + r.id + " -> " + m.resolve(r).string();
        ++count;
      }
    }
    if (count > 0) {
      throw ValidationError(path.string() + ": " + std::to_string(count) + " missing file(s):" + missing +
                            (count > 20 ? "\n  ..." : ""));
    }
  }
  return m;
}

/// Concatenates manifests; ids must stay unique across all of them.
inline Manifest merge_manifests(const std::vector<Manifest>& parts) {
  Manifest merged;
  std::set<std::string> seen;
  for (const auto& part : parts) {
    for (auto r : part.entries) {
      if (!seen.insert(r.id).second) throw ValidationError("duplicate id across manifests: '" + r.id + "'");
      r.path = part.resolve(r).string();
      merged.entries.push_back(std::move(r));
    }
  }
  return merged;
}

inline std::string lowercase_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpeg") ext = ".jpg";
  return ext;
}

/// Describes a real/fake file-format mismatch (e.g. JPEG reals vs PNG fakes),
/// which lets codec traces masquerade as detection signal.
inline std::optional<std::string> format_mismatch(const Manifest& manifest) {
  std::set<std::string> real_ext, fake_ext;
  for (const auto& r : manifest.entries) {
    (r.label == Label::kReal ? real_ext : fake_ext).insert(lowercase_extension(r.path));
  }
  if (real_ext.empty() || fake_ext.empty() || real_ext == fake_ext) return std::nullopt;
  auto join = [](const std::set<std::string>& s) {
    std::string out;
    for (const auto& e : s) out += (out.empty() ? "" : "/") + e;
    return out;
  };
  return "real images stored as " + join(real_ext) + " but fake images as " + join(fake_ext) +
         "; format differences can bias the evaluation";
}

}  // namespace rigid
