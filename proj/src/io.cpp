#include "gramdos/io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gramdos {

const char* const kToolVersion = "0.1.0";

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, sep)) parts.push_back(trim(item));
  return parts;
}

}  // namespace

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end())
    throw std::invalid_argument("config: missing required key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::getOr(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KeyValueConfig::getDouble(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("config: key '" + key + "' is not a number");
  }
}

long KeyValueConfig::getLong(const std::string& key) const {
  try {
    return std::stol(get(key));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("config: key '" + key + "' is not an integer");
  }
}

Vec KeyValueConfig::getVector(const std::string& key) const {
  const auto parts = split(get(key), ',');
  Vec v(static_cast<Index>(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) {
    try {
      v[static_cast<Index>(i)] = std::stod(parts[i]);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("config: key '" + key + "' has a non-numeric entry");
    }
  }
  return v;
}

Mat KeyValueConfig::getMatrix(const std::string& key) const {
  const auto rows = split(get(key), ';');
  std::vector<Vec> parsed;
  for (const auto& row : rows) {
    const auto parts = split(row, ',');
    Vec v(static_cast<Index>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i) v[static_cast<Index>(i)] = std::stod(parts[i]);
    parsed.push_back(std::move(v));
  }
  if (parsed.empty()) throw std::invalid_argument("config: key '" + key + "' is empty");
  Mat m(static_cast<Index>(parsed.size()), parsed.front().size());
  for (size_t r = 0; r < parsed.size(); ++r) {
    if (parsed[r].size() != m.cols())
      throw std::invalid_argument("config: key '" + key + "' has ragged rows");
    m.row(static_cast<Index>(r)) = parsed[r];
  }
  return m;
}

KeyValueConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  KeyValueConfig config;
  config.sourcePath = path;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineNo) +
                                  " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config: empty key on line " +
                                                 std::to_string(lineNo));
    config.values[key] = value;
  }
  return config;
}

Mat load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("matrix csv: cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("matrix csv: ragged rows in '" + path + "'");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("matrix csv: '" + path + "' is empty");
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

VarianceProfile profile_from_config(const KeyValueConfig& config) {
  VarianceProfile profile;
  if (config.has("matrix_csv")) {
    namespace fs = std::filesystem;
    fs::path csv(config.get("matrix_csv"));
    if (csv.is_relative() && !config.sourcePath.empty())
      csv = fs::path(config.sourcePath).parent_path() / csv;
    profile = make_profile(load_matrix_csv(csv.string()));
  } else {
    BlockSpec spec;
    spec.values = config.getMatrix("block_values");
    spec.rowFractions = config.has("row_fractions") ? config.getVector("row_fractions")
                                                    : Vec::Ones(spec.values.rows());
    spec.colFractions = config.has("col_fractions") ? config.getVector("col_fractions")
                                                    : Vec::Ones(spec.values.cols());
    if (spec.rowFractions.sum() != 0.0) spec.rowFractions /= spec.rowFractions.sum();
    if (spec.colFractions.sum() != 0.0) spec.colFractions /= spec.colFractions.sum();
    const std::string norm = config.getOr("normalization", "paper");
    if (norm == "paper")
      spec.normalization = BlockNormalization::Paper;
    else if (norm == "raw")
      spec.normalization = BlockNormalization::Raw;
    else
      throw std::invalid_argument("config: normalization must be 'paper' or 'raw'");
    profile = build_block_profile(spec, config.getLong("p"), config.getLong("n"));
  }
  if (config.has("weight1")) profile.weight1.setConstant(config.getDouble("weight1"));
  if (config.has("weight2")) profile.weight2.setConstant(config.getDouble("weight2"));
  profile.validate();
  return profile;
}

std::uint64_t profile_hash(const VarianceProfile& profile) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto fold = [&h](const void* data, size_t bytes) {
    const auto* bytePtr = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= bytePtr[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dims[2] = {profile.p, profile.n};
  fold(dims, sizeof(dims));
  fold(profile.s.data(), sizeof(double) * static_cast<size_t>(profile.s.size()));
  fold(profile.weight1.data(), sizeof(double) * static_cast<size_t>(profile.weight1.size()));
  fold(profile.weight2.data(), sizeof(double) * static_cast<size_t>(profile.weight2.size()));
  return h;
}

Vec parse_grid(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw std::invalid_argument("grid: expected 'min:max:count'");
  const double lo = std::stod(parts[0]);
  const double hi = std::stod(parts[1]);
  const long count = std::stol(parts[2]);
  if (count < 1 || hi < lo) throw std::invalid_argument("grid: need count >= 1 and max >= min");
  if (count == 1) return Vec::Constant(1, lo);
  return Vec::LinSpaced(count, lo, hi);
}

std::vector<double> parse_list(const std::string& spec) {
  if (spec.find(':') != std::string::npos) {
    const Vec grid = parse_grid(spec);
    return {grid.data(), grid.data() + grid.size()};
  }
  std::vector<double> out;
  for (const auto& part : split(spec, ',')) out.push_back(std::stod(part));
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<Vec>& columns) {
  if (columns.size() != header.size())
    throw std::invalid_argument("write_csv: header/column mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
  for (size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  const Index rows = columns.empty() ? 0 : columns.front().size();
  char buffer[64];
  for (Index r = 0; r < rows; ++r) {
    for (size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", columns[c][r]);
      out << (c ? "," : "") << buffer;
    }
    out << "\n";
  }
}

std::string current_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buffer;
}

void write_manifest(const Manifest& manifest, const std::string& primaryOutput) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["tool_version"] = kToolVersion;
  j["profile_hash"] = manifest.profileHash;
  j["seed"] = manifest.seed;
  j["config"] = manifest.config;
  j["outputs"] = manifest.outputs;
  j["started_at"] = manifest.startedAt;
  j["finished_at"] = manifest.finishedAt;

  std::ofstream out(primaryOutput + ".manifest.json");
  if (!out) throw std::runtime_error("manifest: cannot open '" + primaryOutput +
                                     ".manifest.json'");
  out << j.dump(2) << "\n";
}

}  // namespace gramdos
