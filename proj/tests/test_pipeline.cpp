#include <catch2/catch_amalgamated.hpp>

#include "kicktop/pipeline.hpp"

using namespace kicktop;

namespace {

ExperimentConfig tiny_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.spin = 8.0;
  cfg.kappa = 3.0;
  cfg.grid_n = 40;
  cfg.mask_kicks = 20000;
  cfg.seed = 99;
  cfg.t0 = 100;
  cfg.t_window = 80;
  cfg.snapshot_times = {0, 5};
  cfg.output_dir = out;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kicktop_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> run_logged(Pipeline& p) {
  std::vector<std::string> log;
  p.run_all();
  return log;
}

std::map<std::string, std::string> artifact_hashes(const fs::path& dir) {
  std::map<std::string, std::string> hashes;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() &&
        entry.path().filename() != "manifest.json")
      hashes[fs::relative(entry.path(), dir).string()] = file_hash(entry.path());
  return hashes;
}

}  // namespace

TEST_CASE("pipeline: full run produces the documented artifact set") {
  const fs::path dir = fresh_dir("full_run");
  Pipeline pipeline(tiny_config(dir.string()));
  pipeline.run_all();
  for (const char* name :
       {"config.json", "manifest.json", "poincare.csv", "poincare.meta.json",
        "mask.csv", "mask.meta.json", "spectrum.csv", "eigvec.bin",
        "spectrum.meta.json", "chi.csv", "chi.meta.json", "otoc_series.csv",
        "profiles.csv", "otoc.meta.json", "histograms/chi.csv",
        "histograms/gamma.csv", "histograms/cbar.csv", "correlations.json"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / name));
  }
  // snapshot fields for the three representative states at the two times
  int snapshots = 0;
  for (const auto& entry : fs::directory_iterator(dir / "snapshots"))
    snapshots += entry.is_regular_file();
  CHECK(snapshots >= 4);

  const json manifest = read_json_file(dir / "manifest.json");
  for (const auto& stage : stage_names()) {
    INFO(stage);
    REQUIRE(manifest["stages"].contains(stage));
    CHECK(manifest["stages"][stage]["completed"].get<bool>());
    CHECK(manifest["stages"][stage]["wall_seconds"].get<double>() >= 0.0);
  }

  // config echo holds the resolved defaults
  const auto echoed = config_from_json(read_json_file(dir / "config.json"));
  CHECK(echoed.spin == 8.0);
  CHECK(echoed.t_window == 80);
  CHECK(echoed.alpha == Catch::Approx(13.0 * pi / 19.0));
}

TEST_CASE("pipeline: rerun is served from cache, resumability regenerates") {
  const fs::path dir = fresh_dir("cache");
  std::vector<std::string> log;
  const auto logger = [&](const std::string& msg) { log.push_back(msg); };

  {
    Pipeline pipeline(tiny_config(dir.string()), logger);
    pipeline.run_all();
  }
  const auto first = artifact_hashes(dir);

  log.clear();
  {
    Pipeline pipeline(tiny_config(dir.string()), logger);
    pipeline.run_all();
  }
  int cached = 0;
  for (const auto& msg : log) cached += msg.find("cached") != std::string::npos;
  CHECK(cached == static_cast<int>(stage_names().size()));
  CHECK(artifact_hashes(dir) == first);

  // deleting a mid-chain artifact regenerates it byte-identically and leaves
  // upstream and downstream served from cache
  fs::remove(dir / "chi.csv");
  log.clear();
  {
    Pipeline pipeline(tiny_config(dir.string()), logger);
    pipeline.run_all();
  }
  cached = 0;
  bool chi_recomputed = false;
  for (const auto& msg : log) {
    cached += msg.find("cached") != std::string::npos;
    if (msg.find("stage chi:") != std::string::npos &&
        msg.find("cached") == std::string::npos)
      chi_recomputed = true;
  }
  CHECK(chi_recomputed);
  CHECK(cached == static_cast<int>(stage_names().size()) - 1);
  CHECK(artifact_hashes(dir) == first);
}

TEST_CASE("pipeline: config changes invalidate exactly the affected stages") {
  const fs::path dir = fresh_dir("invalidate");
  std::vector<std::string> log;
  const auto logger = [&](const std::string& msg) { log.push_back(msg); };
  {
    Pipeline pipeline(tiny_config(dir.string()), logger);
    pipeline.run_all();
  }
  auto cfg = tiny_config(dir.string());
  cfg.t_window = 60;  // only the otoc and analyze stages consume this
  log.clear();
  {
    Pipeline pipeline(cfg, logger);
    pipeline.run_all();
  }
  int recomputed = 0;
  for (const auto& msg : log)
    if (msg.find("stage") != std::string::npos &&
        msg.find("cached") == std::string::npos &&
        msg.find("WARNING") == std::string::npos &&
        msg.find("time points") == std::string::npos)
      ++recomputed;
  CHECK(recomputed == 2);
}

TEST_CASE("pipeline: determinism across fresh runs") {
  const fs::path dir1 = fresh_dir("det1");
  const fs::path dir2 = fresh_dir("det2");
  auto cfg1 = tiny_config(dir1.string());
  auto cfg2 = tiny_config(dir2.string());
  Pipeline(cfg1).run_all();
  Pipeline(cfg2).run_all();
  auto h1 = artifact_hashes(dir1);
  auto h2 = artifact_hashes(dir2);
  h1.erase("config.json");  // differs by output_dir only
  h2.erase("config.json");
  REQUIRE(h1 == h2);
}

TEST_CASE("pipeline: regular regime completes with the no-chaos flag") {
  const fs::path dir = fresh_dir("regular");
  auto cfg = tiny_config(dir.string());
  cfg.kappa = 0.2;
  const auto warnings = validate_config(cfg);
  REQUIRE_FALSE(warnings.empty());  // kappa outside the mixed window

  Pipeline pipeline(cfg);
  pipeline.run_all();
  const json mask_meta = read_json_file(dir / "mask.meta.json");
  CHECK(mask_meta["no_chaotic_sea"].get<bool>());
  CHECK(mask_meta["chaotic_fraction"].get<double>() == 0.0);

  const CsvTable chi = read_csv(dir / "chi.csv");
  const int lc = chi.column("label"), cc = chi.column("chi");
  for (const auto& row : chi.rows) {
    REQUIRE(row[lc] == "regular");
    REQUIRE(std::stod(row[cc]) == -1.0);
  }

  // chi has zero variance, so the correlation is explicitly undefined
  const json report = read_json_file(dir / "correlations.json");
  CHECK(report["r_p_chi_gamma"].is_null());
  CHECK(report["undefined"].contains("r_p_chi_gamma"));
}

TEST_CASE("pipeline: stage-scoped run requires upstream artifacts") {
  const fs::path dir = fresh_dir("missing_upstream");
  Pipeline pipeline(tiny_config(dir.string()));
  try {
    pipeline.run_stage("chi");
    FAIL("expected StageError");
  } catch (const StageError& e) {
    const std::string what = e.what();
    CHECK(what.find("mask") != std::string::npos);
  }
}

TEST_CASE("pipeline: single-eigenstate otoc output") {
  const fs::path dir = fresh_dir("only_k");
  auto cfg = tiny_config(dir.string());
  Pipeline(cfg).run_all();

  auto cfg_k = cfg;
  cfg_k.only_k = 6;
  Pipeline pipeline(cfg_k);
  pipeline.run_stage("otoc");
  const CsvTable series = read_csv(dir / "otoc_series.csv");
  const int kc = series.column("k");
  REQUIRE_FALSE(series.rows.empty());
  for (const auto& row : series.rows) REQUIRE(row[kc] == "6");
  const CsvTable profiles = read_csv(dir / "profiles.csv");
  REQUIRE(profiles.rows.size() == 1);
}

TEST_CASE("pipeline: profile table feeds the correlation sweep") {
  const fs::path dir_a = fresh_dir("sweep_a");
  const fs::path dir_b = fresh_dir("sweep_b");
  auto cfg_a = tiny_config(dir_a.string());
  auto cfg_b = tiny_config(dir_b.string());
  cfg_b.spin = 10.0;
  Pipeline(cfg_a).run_all();
  Pipeline(cfg_b).run_all();
  const auto sweep =
      sweep_from_profiles({dir_a / "profiles.csv", dir_b / "profiles.csv"});
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[0].spin == 8.0);
  CHECK(sweep[1].spin == 10.0);
  for (const auto& entry : sweep) {
    CHECK(std::abs(entry.r_chi_gamma) <= 1.0);
    CHECK(std::abs(entry.r_chi_cbar) <= 1.0);
  }
}

TEST_CASE("pipeline: alternate observable runs end to end") {
  const fs::path dir = fresh_dir("observable_sy");
  auto cfg = tiny_config(dir.string());
  cfg.observable = "sy";
  Pipeline(cfg).run_all();
  const json meta = read_json_file(dir / "spectrum.meta.json");
  CHECK(meta["observable"].get<std::string>() == "sy");
  const CsvTable profiles = read_csv(dir / "profiles.csv");
  REQUIRE(profiles.rows.size() == 17);  // 2S + 1 at S = 8
  const int gcol = profiles.column("gamma");
  bool any_nonzero = false;
  for (const auto& row : profiles.rows)
    any_nonzero = any_nonzero || std::stod(row[gcol]) != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("pipeline: spectrum artifacts reload bit-exactly") {
  const fs::path dir = fresh_dir("spectrum_roundtrip");
  const auto cfg = tiny_config(dir.string());
  Pipeline pipeline(cfg);
  pipeline.run_stage("spectrum");
  const auto loaded = pipeline.load_spectrum();

  const auto ops = build_spin_operators(cfg.spin);
  const auto fresh = floquet_spectrum(build_floquet(ops, cfg.alpha, cfg.kappa),
                                      ops.sx, cfg.spin);
  REQUIRE(loaded.dim == fresh.dim);
  CHECK((loaded.quasienergies - fresh.quasienergies).cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_abs(loaded.eigenvectors - fresh.eigenvectors) == 0.0);
  CHECK(max_abs(loaded.sx_eig - fresh.sx_eig) == 0.0);
}

TEST_CASE("pipeline: config json round trip") {
  ExperimentConfig cfg;
  cfg.spin = 12.5;
  cfg.tau_override = 4;
  cfg.only_k = 3;
  cfg.snapshot_times = {1, 2, 3};
  cfg.observable = "sy";
  const auto back = config_from_json(config_to_json(cfg));
  CHECK(back.spin == 12.5);
  CHECK(back.tau_override.value() == 4);
  CHECK(back.only_k.value() == 3);
  CHECK(back.snapshot_times == std::vector<long>{1, 2, 3});
  CHECK(back.observable == "sy");

  CHECK_THROWS_AS(validate_config([] {
                    ExperimentConfig bad;
                    bad.observable = "sz";
                    return bad;
                  }()),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config([] {
                    ExperimentConfig bad;
                    bad.chi_regular = 0.9;
                    bad.chi_chaotic = 0.8;
                    return bad;
                  }()),
                  std::invalid_argument);
}
