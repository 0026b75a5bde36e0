#include "gramdos/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace gramdos;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& contents) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config parsing") {
  TempFile file("gramdos_test_profile.cfg",
                "# figure-style profile\n"
                "p = 40\n"
                "n = 40\n"
                "block_values = 6,4; 4,3\n"
                "row_fractions = 0.5, 0.5\n"
                "col_fractions = 0.5, 0.5\n"
                "normalization = paper\n");
  const KeyValueConfig config = load_config(file.path);
  CHECK(config.getLong("p") == 40);
  CHECK(config.getMatrix("block_values")(1, 0) == 4.0);

  const VarianceProfile profile = profile_from_config(config);
  CHECK(profile.p == 40);
  CHECK(profile.s(0, 0) == doctest::Approx(6.0 / 80.0));
}

TEST_CASE("config error reporting names the key") {
  TempFile file("gramdos_test_bad.cfg", "p = 4\nn = x\nblock_values = 1\n");
  const KeyValueConfig config = load_config(file.path);
  try {
    profile_from_config(config);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& err) {
    CHECK(std::string(err.what()).find("'n'") != std::string::npos);
  }
  CHECK_THROWS_AS(config.get("missing_key"), std::invalid_argument);
  CHECK_THROWS_AS(load_config("/nonexistent/path.cfg"), std::invalid_argument);
}

TEST_CASE("matrix csv profiles") {
  TempFile csv("gramdos_test_matrix.csv", "0.5,0.25\n0.25,0.5\n0.1,0.1\n");
  TempFile cfg("gramdos_test_csvprofile.cfg", "matrix_csv = " +
                                                  csv.path + "\n");
  const VarianceProfile profile = profile_from_config(load_config(cfg.path));
  CHECK(profile.p == 3);
  CHECK(profile.n == 2);
  CHECK(profile.s(2, 1) == doctest::Approx(0.1));
}

TEST_CASE("grid parsing") {
  const Vec grid = parse_grid("0.5:2.5:5");
  CHECK(grid.size() == 5);
  CHECK(grid[0] == doctest::Approx(0.5));
  CHECK(grid[4] == doctest::Approx(2.5));
  CHECK_THROWS_AS(parse_grid("1:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("2:1:5"), std::invalid_argument);

  const std::vector<double> ladder = parse_list("1,0.1,0.01");
  CHECK(ladder.size() == 3);
  CHECK(ladder[2] == doctest::Approx(0.01));
}

TEST_CASE("csv round trip precision") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "gramdos_test_out.csv").string();
  Vec a(2), b(2);
  a << 1.0 / 3.0, 2.0;
  b << 1e-17, -4.25;
  write_csv(path, {"a", "b"}, {a, b});

  std::ifstream in(path);
  std::string header, row1;
  std::getline(in, header);
  std::getline(in, row1);
  CHECK(header == "a,b");
  double x = 0, y = 0;
  std::sscanf(row1.c_str(), "%lf,%lf", &x, &y);
  CHECK(x == a[0]);  // 17 significant digits round-trip doubles exactly
  CHECK(y == b[0]);
  std::remove(path.c_str());
}

TEST_CASE("profile hash is sensitive to every field") {
  const VarianceProfile base = constant_profile(3, 4, 0.5);
  VarianceProfile other = base;
  other.s(1, 2) += 1e-12;
  CHECK(profile_hash(base) != profile_hash(other));
  VarianceProfile reweighted = base;
  reweighted.weight1[0] = 2.0;
  CHECK(profile_hash(base) != profile_hash(reweighted));
  CHECK(profile_hash(base) == profile_hash(constant_profile(3, 4, 0.5)));
}

TEST_CASE("manifest writes and parses back") {
  const std::string out =
      (std::filesystem::temp_directory_path() / "gramdos_test_output.csv").string();
  Manifest manifest;
  manifest.command = "density";
  manifest.config["energies"] = "0.05:5:100";
  manifest.profileHash = 12345;
  manifest.seed = 7;
  manifest.outputs = {out};
  manifest.startedAt = current_timestamp();
  manifest.finishedAt = current_timestamp();
  write_manifest(manifest, out);

  std::ifstream in(out + ".manifest.json");
  REQUIRE(in.good());
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  CHECK(contents.find("\"command\": \"density\"") != std::string::npos);
  CHECK(contents.find("12345") != std::string::npos);
  std::remove((out + ".manifest.json").c_str());
}
