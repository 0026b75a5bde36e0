#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gramdos/profile.hpp"
#include "gramdos/types.hpp"

namespace gramdos {

/// key = value configuration file ('#' comments, lists comma-separated,
/// block value rows separated by ';').
struct KeyValueConfig {
  std::map<std::string, std::string> values;
  std::string sourcePath;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  std::string getOr(const std::string& key, const std::string& fallback) const;
  double getDouble(const std::string& key) const;
  long getLong(const std::string& key) const;
  Vec getVector(const std::string& key) const;
  Mat getMatrix(const std::string& key) const;  // rows split on ';'
};

KeyValueConfig load_config(const std::string& path);

/// Builds a profile from a config: either a block description (p, n,
/// block_values, row_fractions, col_fractions, normalization in
/// {"paper","raw"}) or a dense matrix_csv (path relative to the config file).
/// Optional weight1/weight2 scalars set constant measure weights.
VarianceProfile profile_from_config(const KeyValueConfig& config);

/// Dense CSV of variances, one row per line.
Mat load_matrix_csv(const std::string& path);

/// FNV-1a over dimensions, variances, and weights.
std::uint64_t profile_hash(const VarianceProfile& profile);

/// "min:max:count" -> linearly spaced grid (count >= 1).
Vec parse_grid(const std::string& spec);
/// "a,b,c" or "min:max:count" (geometric when key has log_ prefix handled by caller).
std::vector<double> parse_list(const std::string& spec);

/// Writes rows with 17 significant digits; columns.size() == header.size().
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<Vec>& columns);

struct Manifest {
  std::string command;
  std::map<std::string, std::string> config;  // resolved flags and defaults
  std::uint64_t profileHash = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string startedAt;
  std::string finishedAt;
};

/// Serializes the manifest as JSON next to the outputs ("<out>.manifest.json").
void write_manifest(const Manifest& manifest, const std::string& primaryOutput);

std::string current_timestamp();

extern const char* const kToolVersion;

}  // namespace gramdos
