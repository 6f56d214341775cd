#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "curvreg_cli/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("curvreg");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return curvreg_cli::cli_main(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Coarse scanner + small pyramid so CLI end-to-end runs stay quick.
void write_fast_config(const std::string& path) {
  std::ofstream out(path);
  out << "config_version=1\n"
      << "az_res_deg=1\n"
      << "el_res_deg=1\n"
      << "el_start_deg=-60\n"
      << "el_end_deg=10\n"
      << "n_scales=4\n";
}

}  // namespace

TEST_CASE("cli rejects unknown subcommands and missing arguments") {
  CHECK(run_cli({"frobnicate"}) != 0);
  CHECK(run_cli({}) != 0);
  CHECK(run_cli({"register"}) != 0);  // missing required paths
}

TEST_CASE("cli synthesizes, registers, and batch-evaluates a scan set") {
  TempDir dir("curvreg_cli_e2e");
  const std::string config = dir.file("run.cfg");
  write_fast_config(config);

  const std::string scans = dir.file("scans");
  REQUIRE(run_cli({"synth", "-o", scans, "--count", "4", "--noise", "0.01",
                   "--config", config, "--seed", "5"}) == 0);
  REQUIRE(fs::exists(scans + "/scan_000.ply"));
  REQUIRE(fs::exists(scans + "/scan_003.ply"));
  REQUIRE(fs::exists(scans + "/truth.txt"));
  REQUIRE(fs::exists(scans + "/config.txt"));

  SUBCASE("register a scan against itself gives the identity") {
    const std::string out = dir.file("self.json");
    REQUIRE(run_cli({"register", scans + "/scan_000.ply", scans + "/scan_000.ply",
                     "-o", out, "--config", config}) == 0);

    const nlohmann::json doc = nlohmann::json::parse(slurp(out));
    const auto rotation = doc.at("rotation").get<std::vector<double>>();
    REQUIRE(rotation.size() == 9);
    const double eye[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int i = 0; i < 9; ++i) CHECK(std::abs(rotation[static_cast<size_t>(i)] - eye[i]) < 1e-6);
    for (const double t : doc.at("translation").get<std::vector<double>>())
      CHECK(std::abs(t) < 1e-6);
    CHECK(doc.at("inliers").get<long>() == doc.at("matches").get<long>());
    CHECK(doc.contains("timings_s"));
  }

  SUBCASE("match CSV dump aligns with the result") {
    const std::string out = dir.file("with_matches.json");
    const std::string matches = dir.file("matches.csv");
    REQUIRE(run_cli({"register", scans + "/scan_000.ply", scans + "/scan_001.ply",
                     "-o", out, "--matches-out", matches, "--config", config}) == 0);
    std::ifstream in(matches);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "model_idx,data_idx,desc_dist,inlier");
    size_t rows = 0;
    for (std::string line; std::getline(in, line);) rows += line.empty() ? 0 : 1;
    const nlohmann::json doc = nlohmann::json::parse(slurp(out));
    CHECK(rows == doc.at("matches").get<size_t>());
  }

  SUBCASE("batch produces per-pair JSONs and evaluation artifacts") {
    const std::string out = dir.file("batch");
    REQUIRE(run_cli({"batch", "--dir", scans, "--truth", scans + "/truth.txt",
                     "-o", out, "--config", config, "--no-timings"}) == 0);

    CHECK(fs::exists(out + "/pair_scan_000__scan_001.json"));
    CHECK(fs::exists(out + "/pair_scan_001__scan_002.json"));
    CHECK(fs::exists(out + "/pair_scan_002__scan_003.json"));
    CHECK(fs::exists(out + "/ecdf_translation.csv"));
    CHECK(fs::exists(out + "/ecdf_rotation.csv"));
    CHECK(fs::exists(out + "/trajectory.txt"));
    CHECK(fs::exists(out + "/map.ply"));

    std::ifstream in(out + "/rmse_summary.csv");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "metric,value");

    SUBCASE("a second identical batch run is byte-identical") {
      const std::string out2 = dir.file("batch2");
      REQUIRE(run_cli({"batch", "--dir", scans, "--truth", scans + "/truth.txt",
                       "-o", out2, "--config", config, "--no-timings"}) == 0);
      for (const auto& entry : fs::directory_iterator(out)) {
        const std::string name = entry.path().filename().string();
        CAPTURE(name);
        CHECK(slurp(entry.path().string()) ==
              slurp((fs::path(out2) / name).string()));
      }
    }
  }

  SUBCASE("project and coeffs and features write their artifacts") {
    const std::string pgm = dir.file("scan.pgm");
    REQUIRE(run_cli({"project", scans + "/scan_000.ply", "-o", pgm, "--config",
                     config}) == 0);
    CHECK(fs::exists(pgm));
    CHECK(fs::exists(pgm + ".txt"));

    const std::string mosaic = dir.file("mosaic.pgm");
    const std::string coeff = dir.file("coeff.bin");
    REQUIRE(run_cli({"coeffs", scans + "/scan_000.ply", "-o", mosaic,
                     "--binary-out", coeff, "--config", config}) == 0);
    CHECK(fs::exists(mosaic));
    CHECK(fs::exists(coeff));

    const std::string prefix = dir.file("feat");
    REQUIRE(run_cli({"features", scans + "/scan_000.ply", "-o", prefix, "--config",
                     config}) == 0);
    CHECK(fs::exists(prefix + ".csv"));
    CHECK(fs::exists(prefix + ".desc"));
  }
}

TEST_CASE("cli surfaces pipeline errors as nonzero exits") {
  TempDir dir("curvreg_cli_err");
  CHECK(run_cli({"register", dir.file("missing_a.ply"), dir.file("missing_b.ply"),
                 "-o", dir.file("out.json")}) != 0);

  const std::string bad_cfg = dir.file("bad.cfg");
  {
    std::ofstream out(bad_cfg);
    out << "config_version=1\nunknown_key=1\n";
  }
  CHECK(run_cli({"selftest", "--config", bad_cfg}) != 0);
}

TEST_CASE("cli selftest passes") {
  CHECK(run_cli({"selftest"}) == 0);
}
