#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "kicktop/io.hpp"

// End-to-end checks of the installed binary: exit codes and the documented
// artifact contract.  The binary path arrives via the KICKTOP_BIN environment
// variable set by ctest.

namespace {

namespace fs = std::filesystem;

std::string binary() {
  const char* bin = std::getenv("KICKTOP_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

int run_cli(const std::string& args) {
  const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kicktop_cli" / name;
  fs::remove_all(dir);
  return dir;
}

const std::string kTinyFlags =
    "--S 6 --kappa 3 --grid-n 30 --mask-kicks 10000 --t0 100 --T 40 "
    "--snapshots 0,5 --seed 7";

}  // namespace

TEST_CASE("cli: usage errors exit with code 1") {
  CHECK(run_cli("--definitely-not-a-flag run") == 1);
  CHECK(run_cli("") == 1);                     // missing subcommand
  CHECK(run_cli("run --S -3 --out /tmp/x") == 1);  // invalid spin
  CHECK(run_cli("run --thresholds 0.9,0.1 --out /tmp/x") == 1);
}

TEST_CASE("cli: stage-scoped invocation without upstream exits with code 2") {
  const fs::path dir = fresh_dir("upstream");
  CHECK(run_cli("chi " + kTinyFlags + " --out " + dir.string()) == 2);
}

TEST_CASE("cli: full run, then stage reuse and field export") {
  const fs::path dir = fresh_dir("run");
  REQUIRE(run_cli("run " + kTinyFlags + " --out " + dir.string()) == 0);
  for (const char* name :
       {"poincare.csv", "mask.csv", "spectrum.csv", "chi.csv",
        "otoc_series.csv", "profiles.csv", "correlations.json"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / name));
  }
  // the chi stage is cached now; the field export still runs
  REQUIRE(run_cli("chi " + kTinyFlags + " --export-field 2 --out " +
                  dir.string()) == 0);
  CHECK(fs::exists(dir / "husimi_field_k2.csv"));

  // single-eigenstate otoc rewrite
  REQUIRE(run_cli("otoc " + kTinyFlags + " --k 3 --out " + dir.string()) == 0);
  const auto series = kicktop::read_csv(dir / "otoc_series.csv");
  for (const auto& row : series.rows)
    REQUIRE(row[series.column("k")] == "3");
}

TEST_CASE("cli: config file with flag overrides") {
  const fs::path dir = fresh_dir("config");
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "experiment.json";
  kicktop::write_text_file(
      cfg_path,
      "{\"spin\": 6, \"kappa\": 3.0, \"grid_n\": 30, \"mask_kicks\": 10000,\n"
      " \"t0\": 100, \"t_window\": 40, \"snapshot_times\": [0],\n"
      " \"seed\": 7, \"output_dir\": \"" + (dir / "out").string() + "\"}");
  // --grid-n on the command line beats the file
  REQUIRE(run_cli("spectrum --config " + cfg_path.string() + " --grid-n 24") == 0);
  const auto echoed = kicktop::read_json_file(dir / "out" / "config.json");
  CHECK(echoed["grid_n"].get<int>() == 24);
  CHECK(echoed["spin"].get<double>() == 6.0);
  CHECK(echoed["t_window"].get<long>() == 40);
}

TEST_CASE("cli: analyze over multiple profile tables emits a sweep") {
  const fs::path dir_a = fresh_dir("sweep_a");
  const fs::path dir_b = fresh_dir("sweep_b");
  REQUIRE(run_cli("run " + kTinyFlags + " --out " + dir_a.string()) == 0);
  REQUIRE(run_cli("run --S 8 --kappa 3 --grid-n 30 --mask-kicks 10000 --t0 100 "
                  "--T 40 --snapshots 0 --seed 7 --out " + dir_b.string()) == 0);
  const fs::path sweep_dir = fresh_dir("sweep_out");
  REQUIRE(run_cli("analyze " + (dir_a / "profiles.csv").string() + " " +
                  (dir_b / "profiles.csv").string() + " --out " +
                  sweep_dir.string()) == 0);
  const auto sweep = kicktop::read_csv(sweep_dir / "correlation_sweep.csv");
  REQUIRE(sweep.rows.size() == 2);
}
