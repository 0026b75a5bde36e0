#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace {

namespace fs = std::filesystem;

std::string cli_path() { return GRAMDOS_CLI_PATH; }

int run(const std::string& args) {
  const std::string command = cli_path() + " " + args + " 2>/dev/null";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "gramdos_cli_test";
    fs::create_directories(dir);
  }
  fs::path file(const std::string& name) const { return dir / name; }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

void write_mp_profile(const fs::path& path, int n) {
  std::ofstream out(path);
  out << "p = " << n << "\nn = " << n << "\n"
      << "block_values = " << 1.0 / n << "\n"
      << "normalization = raw\n";
}

}  // namespace

TEST_CASE("density subcommand writes the curve, support report, and manifest") {
  Workspace ws;
  write_mp_profile(ws.file("mp.cfg"), 40);
  const std::string out = ws / "density.csv";
  const int code = run("density --profile " + (ws / "mp.cfg") +
                       " --energies 0.05:5:40 --eta-floor 1e-5 --out " + out);
  REQUIRE(code == 0);

  const std::string csv = slurp(out);
  CHECK(csv.rfind("E,avg_density,min_component,max_component", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);  // header + 40 rows
  CHECK(fs::exists(out + ".support.txt"));
  CHECK(fs::exists(out + ".manifest.json"));
  const std::string manifest = slurp(out + ".manifest.json");
  CHECK(manifest.find("\"command\": \"density\"") != std::string::npos);
  CHECK(manifest.find("profile_hash") != std::string::npos);
}

TEST_CASE("classify emits edge entries for the square constant profile") {
  Workspace ws;
  write_mp_profile(ws.file("mp.cfg"), 40);
  const std::string out = ws / "report.json";
  const int code = run("classify --profile " + (ws / "mp.cfg") +
                       " --delta 0.05 --eta-floor 1e-6 --out " + out);
  REQUIRE(code == 0);
  const std::string report = slurp(out);
  CHECK(report.find("EDGE_LEFT") != std::string::npos);
  CHECK(report.find("EDGE_RIGHT") != std::string::npos);
}

TEST_CASE("verify is deterministic for a fixed seed") {
  Workspace ws;
  write_mp_profile(ws.file("mp.cfg"), 30);
  const std::string out1 = ws / "verify1.json";
  const std::string out2 = ws / "verify2.json";
  const std::string base = "verify --profile " + (ws / "mp.cfg") +
                           " --trials 4 --seed 7 --gamma 0.4 --delta 0.05 "
                           "--zeta-grid 1:3:3 --out ";
  REQUIRE(run(base + out1) == 0);
  REQUIRE(run(base + out2) == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(slurp(out1).find("pass_fraction_avg") != std::string::npos);
}

TEST_CASE("sample emits one csv per trial, reproducibly") {
  Workspace ws;
  write_mp_profile(ws.file("mp.cfg"), 12);
  const std::string prefix = ws / "spec";
  REQUIRE(run("sample --profile " + (ws / "mp.cfg") +
              " --trials 2 --seed 3 --out " + prefix) == 0);
  REQUIRE(fs::exists(prefix + "_trial0.csv"));
  REQUIRE(fs::exists(prefix + "_trial1.csv"));
  const std::string first = slurp(prefix + "_trial0.csv");
  REQUIRE(run("sample --profile " + (ws / "mp.cfg") +
              " --trials 1 --seed 3 --out " + (ws / "again")) == 0);
  CHECK(slurp(ws.file("again_trial0.csv")) == first);
}

TEST_CASE("check-assumptions prints a report") {
  Workspace ws;
  std::ofstream cfg(ws.file("fig.cfg"));
  cfg << "p = 20\nn = 20\nblock_values = 6,4;4,3\n"
      << "row_fractions = 0.5,0.5\ncol_fractions = 0.5,0.5\nnormalization = paper\n";
  cfg.close();
  const std::string command = cli_path() + " check-assumptions --profile " +
                              (ws / "fig.cfg") + " > " + (ws / "assumptions.json") +
                              " 2>/dev/null";
  REQUIRE(WEXITSTATUS(std::system(command.c_str())) == 0);
  const std::string report = slurp(ws.file("assumptions.json"));
  CHECK(report.find("\"irreducible\": true") != std::string::npos);
  CHECK(report.find("\"mass_ratio\": 1.0") != std::string::npos);
}

TEST_CASE("validation failures exit with code 2 and write nothing") {
  Workspace ws;
  const std::string out = ws / "never.csv";
  CHECK(run("density --profile /nonexistent.cfg --energies 1:2:5 --out " + out) == 2);
  CHECK_FALSE(fs::exists(out));

  write_mp_profile(ws.file("mp.cfg"), 10);
  CHECK(run("density --profile " + (ws / "mp.cfg") + " --energies bogus --out " + out) == 2);
  CHECK_FALSE(fs::exists(out));
  CHECK(run("unknown-subcommand") == 2);

  std::ofstream bad(ws.file("bad.cfg"));
  bad << "p = 10\nn = 10\nblock_values = -1\nnormalization = raw\n";
  bad.close();
  CHECK(run("density --profile " + (ws / "bad.cfg") + " --energies 1:2:5 --out " + out) == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("solve subcommand covers the qve sweep") {
  Workspace ws;
  write_mp_profile(ws.file("mp.cfg"), 20);
  const std::string out = ws / "solve.csv";
  REQUIRE(run("solve --profile " + (ws / "mp.cfg") +
              " --energies 0.5:2.5:9 --eta 1,0.1,0.01 --out " + out) == 0);
  const std::string csv = slurp(out);
  CHECK(csv.rfind("E,eta,re_avg_m,im_avg_m,residual,iterations", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}
