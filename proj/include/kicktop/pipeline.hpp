#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kicktop/analysis.hpp"
#include "kicktop/classical.hpp"
#include "kicktop/floquet.hpp"
#include "kicktop/husimi.hpp"
#include "kicktop/io.hpp"
#include "kicktop/otoc.hpp"
#include "kicktop/spin.hpp"

namespace kicktop {

inline constexpr const char* kVersion = "0.1.0";

// Full experiment configuration; defaults reproduce the headline regime
// (S = 150, alpha = 13pi/19, kappa = 3, N = 300, t0 = 100, T = 500).
struct ExperimentConfig {
  double spin = 150.0;
  double alpha = 13.0 * pi / 19.0;
  double kappa = 3.0;
  int grid_n = 300;
  long mask_kicks = 10000000;
  std::uint64_t seed = 20240901;
  std::optional<long> tau_override;
  long t0 = 100;
  long t_window = 500;
  std::vector<long> snapshot_times = {0, 5, 20, 100};
  double chi_regular = -0.8;
  double chi_chaotic = 0.8;
  std::string observable = "sx";
  std::string output_dir = "out";
  int threads = 0;  // 0 = all available
  bool full_fidelity = false;
  int poincare_trajectories = 121;
  long poincare_kicks = 300;
  std::optional<int> only_k;
  int histogram_bins = 40;

  long effective_mask_kicks() const {
    return full_fidelity ? std::max(mask_kicks, 100000000L) : mask_kicks;
  }
};

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["spin"] = c.spin;
  j["alpha"] = c.alpha;
  j["kappa"] = c.kappa;
  j["grid_n"] = c.grid_n;
  j["mask_kicks"] = c.mask_kicks;
  j["seed"] = c.seed;
  if (c.tau_override) j["tau_override"] = *c.tau_override;
  else j["tau_override"] = nullptr;
  j["t0"] = c.t0;
  j["t_window"] = c.t_window;
  j["snapshot_times"] = c.snapshot_times;
  j["chi_regular"] = c.chi_regular;
  j["chi_chaotic"] = c.chi_chaotic;
  j["observable"] = c.observable;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["full_fidelity"] = c.full_fidelity;
  j["poincare_trajectories"] = c.poincare_trajectories;
  j["poincare_kicks"] = c.poincare_kicks;
  if (c.only_k) j["only_k"] = *c.only_k;
  else j["only_k"] = nullptr;
  j["histogram_bins"] = c.histogram_bins;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null())
      field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("spin", c.spin);
  get("alpha", c.alpha);
  get("kappa", c.kappa);
  get("grid_n", c.grid_n);
  get("mask_kicks", c.mask_kicks);
  get("seed", c.seed);
  if (j.contains("tau_override") && !j["tau_override"].is_null())
    c.tau_override = j["tau_override"].get<long>();
  get("t0", c.t0);
  get("t_window", c.t_window);
  get("snapshot_times", c.snapshot_times);
  get("chi_regular", c.chi_regular);
  get("chi_chaotic", c.chi_chaotic);
  get("observable", c.observable);
  get("output_dir", c.output_dir);
  get("threads", c.threads);
  get("full_fidelity", c.full_fidelity);
  get("poincare_trajectories", c.poincare_trajectories);
  get("poincare_kicks", c.poincare_kicks);
  if (j.contains("only_k") && !j["only_k"].is_null())
    c.only_k = j["only_k"].get<int>();
  get("histogram_bins", c.histogram_bins);
  return c;
}

// usage-level validation; returns advisory warnings
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  spin_dimension(c.spin);
  if (c.grid_n < 2) throw std::invalid_argument("grid_n must be >= 2");
  if (c.mask_kicks < 1) throw std::invalid_argument("mask_kicks must be >= 1");
  if (c.t0 < 1 || c.t_window < 1)
    throw std::invalid_argument("t0 and T must be >= 1");
  for (long t : c.snapshot_times)
    if (t < 0) throw std::invalid_argument("snapshot times must be >= 0");
  if (c.chi_regular < -1.0 || c.chi_chaotic > 1.0 ||
      c.chi_regular >= c.chi_chaotic)
    throw std::invalid_argument("thresholds must satisfy -1 <= chi_reg < chi_cha <= 1");
  if (c.observable != "sx" && c.observable != "sy")
    throw std::invalid_argument("observable must be sx or sy");
  if (c.threads < 0) throw std::invalid_argument("threads must be >= 0");
  if (c.histogram_bins < 2) throw std::invalid_argument("histogram bins must be >= 2");
  if (c.poincare_trajectories < 1 || c.poincare_kicks < 1)
    throw std::invalid_argument("poincare parameters must be >= 1");
  if (c.tau_override && *c.tau_override < 1)
    throw std::invalid_argument("tau override must be >= 1");
  if (c.only_k && *c.only_k < 0)
    throw std::invalid_argument("k must be >= 0");
  std::vector<std::string> warnings;
  if (c.kappa < 2.0 || c.kappa > 5.4)
    warnings.push_back(
        "kappa = " + format_double(c.kappa) +
        " lies outside [2, 5.4]; the classical phase space is not mixed there");
  return warnings;
}

struct StageError : std::runtime_error {
  std::string stage;
  StageError(std::string stage_, const std::string& what)
      : std::runtime_error(stage_ + ": " + what), stage(std::move(stage_)) {}
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"poincare", "mask",  "spectrum",
                                              "chi",      "otoc",  "analyze"};
  return names;
}

// Stage orchestration with content-addressed caching.  Every stage hashes its
// slice of the config together with the bytes of its upstream artifacts; a
// stage whose recorded input hash and output hashes both match is served from
// cache, so deleting any artifact regenerates exactly it and its dependents.
class Pipeline {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit Pipeline(ExperimentConfig config, Logger log = {})
      : cfg_(std::move(config)), log_(std::move(log)), dir_(cfg_.output_dir) {
    validate_config(cfg_);
    fs::create_directories(dir_);
    write_json_file(dir_ / "config.json", config_to_json(cfg_));
    if (fs::exists(manifest_path())) {
      manifest_ = read_json_file(manifest_path());
    } else {
      manifest_ = json::object();
    }
    manifest_["code_version"] = kVersion;
    manifest_["config"] = config_to_json(cfg_);
    if (!manifest_.contains("stages")) manifest_["stages"] = json::object();
  }

  const ExperimentConfig& config() const { return cfg_; }
  const fs::path& dir() const { return dir_; }

  void run_all() {
    for (const auto& name : stage_names()) run_stage(name);
  }

  void run_stage(const std::string& name) {
    if (name == "poincare") {
      execute(name, poincare_input_hash(), [&] { return poincare_stage(); });
    } else if (name == "mask") {
      execute(name, mask_input_hash(), [&] { return mask_stage(); });
    } else if (name == "spectrum") {
      execute(name, spectrum_input_hash(), [&] { return spectrum_stage(); });
    } else if (name == "chi") {
      execute(name, chi_input_hash(), [&] { return chi_stage(); });
    } else if (name == "otoc") {
      execute(name, otoc_input_hash(), [&] { return otoc_stage(); });
    } else if (name == "analyze") {
      execute(name, analyze_input_hash(), [&] { return analyze_stage(); });
    } else {
      throw std::invalid_argument("unknown stage: " + name);
    }
  }

  // ---- artifact loaders (also used by tests and the CLI) ----

  ChaoticMask load_mask() const {
    require("mask.csv", "mask");
    require("mask.meta.json", "mask");
    const json meta = read_json_file(dir_ / "mask.meta.json");
    ChaoticMask mask;
    mask.grid = PhaseGrid(meta.at("grid_n").get<int>());
    mask.alpha = meta.at("alpha").get<double>();
    mask.kappa = meta.at("kappa").get<double>();
    mask.n_kicks = meta.at("n_kicks").get<long>();
    mask.seed = meta.at("seed").get<std::uint64_t>();
    mask.seed_exponent = meta.at("seed_exponent").get<double>();
    mask.no_chaotic_sea = meta.at("no_chaotic_sea").get<bool>();
    mask.labels.assign(mask.grid.ncells(), -1);
    mask.visit_counts.assign(mask.grid.ncells(), 0);
    const CsvTable table = read_csv(dir_ / "mask.csv");
    const int pc = table.column("p"), qc = table.column("q"),
              cc = table.column("C");
    for (const auto& row : table.rows) {
      const int p = std::stoi(row[pc]), q = std::stoi(row[qc]);
      mask.labels[mask.grid.index(p, q)] = std::stoi(row[cc]);
    }
    return mask;
  }

  FloquetSpectrum load_spectrum() const {
    require("spectrum.csv", "spectrum");
    require("eigvec.bin", "spectrum");
    require("spectrum.meta.json", "spectrum");
    const json meta = read_json_file(dir_ / "spectrum.meta.json");
    FloquetSpectrum spec;
    spec.spin = meta.at("spin").get<double>();
    spec.dim = meta.at("dim").get<int>();
    spec.quasienergies.resize(spec.dim);
    const CsvTable table = read_csv(dir_ / "spectrum.csv");
    const int kc = table.column("k"), ec = table.column("quasienergy");
    for (const auto& row : table.rows)
      spec.quasienergies(std::stoi(row[kc])) = std::stod(row[ec]);
    spec.eigenvectors = read_complex_matrix(dir_ / "eigvec.bin", spec.dim, spec.dim);
    for (const auto& pair : meta.at("degenerate_pairs"))
      spec.degenerate_pairs.emplace_back(pair[0].get<int>(), pair[1].get<int>());
    const auto ops = build_spin_operators(spec.spin);
    set_observable(spec, cfg_.observable == "sy" ? ops.sy : ops.sx);
    return spec;
  }

  struct ChiRecord {
    int k;
    double quasienergy, chi;
    std::string label;
  };

  std::vector<ChiRecord> load_chi() const {
    require("chi.csv", "chi");
    const CsvTable table = read_csv(dir_ / "chi.csv");
    const int kc = table.column("k"), ec = table.column("quasienergy"),
              cc = table.column("chi"), lc = table.column("label");
    std::vector<ChiRecord> out;
    for (const auto& row : table.rows)
      out.push_back({std::stoi(row[kc]), std::stod(row[ec]), std::stod(row[cc]),
                     row[lc]});
    return out;
  }

  // sampled integer kicks: the short-time window, snapshots, and [t0, t0+T)
  std::vector<long> sample_times() const {
    const long tau = growth_window(cfg_.spin, cfg_.tau_override);
    std::set<long> times;
    for (long t = 0; t <= std::max(tau, 20L); ++t) times.insert(t);
    for (long t : cfg_.snapshot_times) times.insert(t);
    for (long t = cfg_.t0; t < cfg_.t0 + cfg_.t_window; ++t) times.insert(t);
    return {times.begin(), times.end()};
  }

 private:
  ExperimentConfig cfg_;
  Logger log_;
  fs::path dir_;
  json manifest_;

  fs::path manifest_path() const { return dir_ / "manifest.json"; }

  void say(const std::string& msg) const {
    if (log_) log_("[kicktop] " + msg);
  }

  void require(const std::string& file, const std::string& producer) const {
    if (!fs::exists(dir_ / file))
      throw StageError(producer,
                       "missing artifact " + file + " under " + dir_.string() +
                           "; run the `" + producer + "` stage first");
  }

  std::string upstream_hash(const std::vector<std::string>& files,
                            const std::vector<std::string>& producers) const {
    json j = json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      require(files[i], producers[i]);
      j.push_back({files[i], file_hash(dir_ / files[i])});
    }
    return content_hash(j.dump());
  }

  std::string hash_of(const json& stage_inputs) const {
    json j;
    j["code_version"] = kVersion;
    j["inputs"] = stage_inputs;
    return content_hash(j.dump());
  }

  std::string poincare_input_hash() const {
    return hash_of({{"alpha", cfg_.alpha},
                    {"kappa", cfg_.kappa},
                    {"n_traj", cfg_.poincare_trajectories},
                    {"n_kicks", cfg_.poincare_kicks},
                    {"seed", cfg_.seed}});
  }

  std::string mask_input_hash() const {
    return hash_of({{"alpha", cfg_.alpha},
                    {"kappa", cfg_.kappa},
                    {"grid_n", cfg_.grid_n},
                    {"n_kicks", cfg_.effective_mask_kicks()},
                    {"seed", cfg_.seed}});
  }

  std::string spectrum_input_hash() const {
    return hash_of({{"spin", cfg_.spin},
                    {"alpha", cfg_.alpha},
                    {"kappa", cfg_.kappa},
                    {"observable", cfg_.observable}});
  }

  std::string chi_input_hash() const {
    return hash_of(
        {{"grid_n", cfg_.grid_n},
         {"chi_regular", cfg_.chi_regular},
         {"chi_chaotic", cfg_.chi_chaotic},
         {"upstream",
          upstream_hash({"mask.csv", "mask.meta.json", "spectrum.csv",
                         "eigvec.bin", "spectrum.meta.json"},
                        {"mask", "mask", "spectrum", "spectrum", "spectrum"})}});
  }

  std::string otoc_input_hash() const {
    json inputs = {{"grid_n", cfg_.grid_n},
                   {"t0", cfg_.t0},
                   {"t_window", cfg_.t_window},
                   {"tau", growth_window(cfg_.spin, cfg_.tau_override)},
                   {"snapshot_times", cfg_.snapshot_times},
                   {"upstream",
                    upstream_hash({"spectrum.csv", "eigvec.bin",
                                   "spectrum.meta.json", "chi.csv"},
                                  {"spectrum", "spectrum", "spectrum", "chi"})}};
    inputs["only_k"] = cfg_.only_k ? json(*cfg_.only_k) : json(nullptr);
    return hash_of(inputs);
  }

  std::string analyze_input_hash() const {
    return hash_of({{"bins", cfg_.histogram_bins},
                    {"upstream", upstream_hash({"profiles.csv"}, {"otoc"})}});
  }

  bool is_cached(const std::string& name, const std::string& input_hash) const {
    if (!manifest_["stages"].contains(name)) return false;
    const json& entry = manifest_["stages"][name];
    if (!entry.value("completed", false)) return false;
    if (entry.value("input_hash", "") != input_hash) return false;
    for (const auto& [file, hash] : entry.at("outputs").items()) {
      if (!fs::exists(dir_ / file)) return false;
      if (file_hash(dir_ / file) != hash.get<std::string>()) return false;
    }
    return true;
  }

  template <typename Body>
  void execute(const std::string& name, const std::string& input_hash,
               Body body) {
    if (is_cached(name, input_hash)) {
      say("stage " + name + ": cached");
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;
    try {
      outputs = body();
    } catch (const StageError&) {
      mark_incomplete(name, input_hash);
      throw;
    } catch (const std::exception& e) {
      mark_incomplete(name, input_hash);
      throw StageError(name, e.what());
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    json entry;
    entry["input_hash"] = input_hash;
    entry["completed"] = true;
    entry["wall_seconds"] = wall;
    entry["outputs"] = json::object();
    for (const auto& file : outputs)
      entry["outputs"][file] = file_hash(dir_ / file);
    manifest_["stages"][name] = entry;
    write_json_file(manifest_path(), manifest_);
    say("stage " + name + ": " + format_double(wall) + " s");
  }

  void mark_incomplete(const std::string& name, const std::string& input_hash) {
    json entry;
    entry["input_hash"] = input_hash;
    entry["completed"] = false;
    entry["outputs"] = json::object();
    manifest_["stages"][name] = entry;
    write_json_file(manifest_path(), manifest_);
  }

  // ---- stage bodies ----

  std::vector<std::string> poincare_stage() {
    const auto section =
        poincare_section(cfg_.alpha, cfg_.kappa, cfg_.poincare_trajectories,
                         cfg_.poincare_kicks, cfg_.seed);
    std::string csv = "phi,cos_theta\n";
    for (const auto& pt : section.points)
      csv += format_double(pt[0]) + "," + format_double(pt[1]) + "\n";
    write_text_file(dir_ / "poincare.csv", csv);
    json meta;
    meta["alpha"] = cfg_.alpha;
    meta["kappa"] = cfg_.kappa;
    meta["n_traj"] = section.n_traj;
    meta["n_kicks"] = section.n_kicks;
    meta["seed"] = section.seed;
    meta["points"] = section.points.size();
    write_json_file(dir_ / "poincare.meta.json", meta);
    return {"poincare.csv", "poincare.meta.json"};
  }

  std::vector<std::string> mask_stage() {
    const auto mask = chaotic_mask(cfg_.alpha, cfg_.kappa, cfg_.grid_n,
                                   cfg_.effective_mask_kicks(), cfg_.seed);
    std::string csv = "p,q,C\n";
    for (int p = 0; p < mask.grid.n; ++p)
      for (int q = 0; q < mask.grid.n; ++q)
        csv += std::to_string(p) + "," + std::to_string(q) + "," +
               std::to_string(mask.labels[mask.grid.index(p, q)]) + "\n";
    write_text_file(dir_ / "mask.csv", csv);
    json meta;
    meta["alpha"] = cfg_.alpha;
    meta["kappa"] = cfg_.kappa;
    meta["grid_n"] = mask.grid.n;
    meta["n_kicks"] = mask.n_kicks;
    meta["seed"] = mask.seed;
    meta["seed_state"] = {mask.seed_state.x, mask.seed_state.y, mask.seed_state.z};
    meta["seed_exponent"] = mask.seed_exponent;
    meta["chaotic_fraction"] = mask.chaotic_fraction();
    meta["no_chaotic_sea"] = mask.no_chaotic_sea;
    write_json_file(dir_ / "mask.meta.json", meta);
    if (mask.no_chaotic_sea)
      say("mask: no chaotic sea detected, all cells labeled regular");
    return {"mask.csv", "mask.meta.json"};
  }

  std::vector<std::string> spectrum_stage() {
    const auto ops = build_spin_operators(cfg_.spin);
    const MatrixXcd f = build_floquet(ops, cfg_.alpha, cfg_.kappa);
    const auto spec = floquet_spectrum(
        f, cfg_.observable == "sy" ? ops.sy : ops.sx, cfg_.spin);
    std::string csv = "k,quasienergy\n";
    for (int k = 0; k < spec.dim; ++k)
      csv += std::to_string(k) + "," + format_double(spec.quasienergies(k)) + "\n";
    write_text_file(dir_ / "spectrum.csv", csv);
    write_complex_matrix(dir_ / "eigvec.bin", spec.eigenvectors);
    json meta;
    meta["spin"] = spec.spin;
    meta["dim"] = spec.dim;
    meta["layout"] = "row-major";
    meta["dtype"] = "complex128-le";
    meta["observable"] = cfg_.observable;
    meta["min_quasienergy_gap"] = min_quasienergy_gap(spec);
    meta["degenerate_pairs"] = json::array();
    for (const auto& [i, j] : spec.degenerate_pairs)
      meta["degenerate_pairs"].push_back({i, j});
    write_json_file(dir_ / "spectrum.meta.json", meta);
    if (spec.has_degeneracies())
      say("spectrum: WARNING, quasienergy degeneracies flagged (" +
          std::to_string(spec.degenerate_pairs.size()) + " pairs)");
    return {"spectrum.csv", "eigvec.bin", "spectrum.meta.json"};
  }

  std::vector<std::string> chi_stage() {
    const auto mask = load_mask();
    if (mask.grid.n != cfg_.grid_n)
      throw std::runtime_error(
          "mask grid (" + std::to_string(mask.grid.n) +
          ") does not match grid_n (" + std::to_string(cfg_.grid_n) +
          "); rerun the mask stage");
    const auto spec = load_spectrum();
    const auto table = coherent_table_eigenbasis(spec, PhaseGrid(cfg_.grid_n));
    const VectorXd chis = chi_all(table, mask);
    const VectorXd norms = husimi_norms(table);
    std::string csv = "k,quasienergy,chi,label\n";
    for (int k = 0; k < spec.dim; ++k) {
      const auto label = classify(chis(k), cfg_.chi_regular, cfg_.chi_chaotic);
      csv += std::to_string(k) + "," + format_double(spec.quasienergies(k)) +
             "," + format_double(chis(k)) + "," + to_string(label) + "\n";
    }
    write_text_file(dir_ / "chi.csv", csv);
    json meta;
    meta["grid_n"] = cfg_.grid_n;
    meta["chi_regular"] = cfg_.chi_regular;
    meta["chi_chaotic"] = cfg_.chi_chaotic;
    meta["chi_min"] = chis.minCoeff();
    meta["chi_max"] = chis.maxCoeff();
    meta["husimi_norm_min"] = norms.minCoeff();
    meta["husimi_norm_max"] = norms.maxCoeff();
    meta["no_chaotic_sea"] = mask.no_chaotic_sea;
    int regular = 0, mixed = 0, chaotic = 0;
    for (int k = 0; k < spec.dim; ++k) {
      switch (classify(chis(k), cfg_.chi_regular, cfg_.chi_chaotic)) {
        case StateClass::Regular: ++regular; break;
        case StateClass::Mixed: ++mixed; break;
        case StateClass::Chaotic: ++chaotic; break;
      }
    }
    meta["count_regular"] = regular;
    meta["count_mixed"] = mixed;
    meta["count_chaotic"] = chaotic;
    write_json_file(dir_ / "chi.meta.json", meta);
    return {"chi.csv", "chi.meta.json"};
  }

  std::vector<std::string> otoc_stage() {
    const auto spec = load_spectrum();
    const auto chi_records = load_chi();
    if (cfg_.only_k && *cfg_.only_k >= spec.dim)
      throw std::runtime_error("k = " + std::to_string(*cfg_.only_k) +
                               " out of range, dim = " + std::to_string(spec.dim));
    if (spec.has_degeneracies())
      say("otoc: WARNING, flagged quasienergy degeneracies; the analytic "
          "long-time average assumes a non-degenerate spectrum");
    const auto table = coherent_table_eigenbasis(spec, PhaseGrid(cfg_.grid_n));
    const std::vector<long> times = sample_times();
    const long tau = growth_window(cfg_.spin, cfg_.tau_override);
    int done_marker = 0;
    const MatrixXd series = otoc_avg_series_all(
        spec, table, times, [&](int done, int total) {
          if (log_ && done * 10 / total > done_marker) {
            done_marker = done * 10 / total;
            say("otoc: " + std::to_string(done) + "/" + std::to_string(total) +
                " time points");
          }
        });
    const VectorXd analytic = longtime_avg_analytic_all(spec, table);

    std::vector<int> ks;
    if (cfg_.only_k) {
      ks.push_back(*cfg_.only_k);
    } else {
      ks.resize(spec.dim);
      std::iota(ks.begin(), ks.end(), 0);
    }

    std::string series_csv = "k,t,avg_otoc\n";
    for (int k : ks)
      for (std::size_t it = 0; it < times.size(); ++it)
        series_csv += std::to_string(k) + "," + std::to_string(times[it]) +
                      "," + format_double(series(k, static_cast<int>(it))) + "\n";
    write_text_file(dir_ / "otoc_series.csv", series_csv);

    // per-state profiles
    auto column_of = [&](long t) {
      for (std::size_t it = 0; it < times.size(); ++it)
        if (times[it] == t) return static_cast<int>(it);
      throw std::runtime_error("time " + std::to_string(t) + " not sampled");
    };
    const int col0 = column_of(0), coltau = column_of(tau);
    std::vector<char> degenerate(spec.dim, 0);
    for (const auto& [i, j] : spec.degenerate_pairs) {
      degenerate[i] = 1;
      degenerate[j] = 1;
    }
    std::string profile_csv =
        "k,quasienergy,chi,gamma,cbar_numeric,cbar_analytic,label,"
        "degenerate_flag,spin\n";
    for (int k : ks) {
      const double gamma =
          (series(k, coltau) - series(k, col0)) / static_cast<double>(tau);
      double cbar = 0.0;
      for (long t = cfg_.t0; t < cfg_.t0 + cfg_.t_window; ++t)
        cbar += series(k, column_of(t));
      cbar /= static_cast<double>(cfg_.t_window);
      profile_csv += std::to_string(k) + "," +
                     format_double(spec.quasienergies(k)) + "," +
                     format_double(chi_records[k].chi) + "," +
                     format_double(gamma) + "," + format_double(cbar) + "," +
                     format_double(analytic(k)) + "," + chi_records[k].label +
                     "," + std::to_string(static_cast<int>(degenerate[k])) +
                     "," + format_double(cfg_.spin) + "\n";
    }
    write_text_file(dir_ / "profiles.csv", profile_csv);

    // snapshot fields for representative states: most regular, most mixed,
    // most chaotic by chi (or just the requested k)
    std::vector<int> snapshot_ks;
    if (cfg_.only_k) {
      snapshot_ks.push_back(*cfg_.only_k);
    } else {
      int kmin = 0, kmax = 0, kmid = 0;
      for (int k = 1; k < spec.dim; ++k) {
        if (chi_records[k].chi < chi_records[kmin].chi) kmin = k;
        if (chi_records[k].chi > chi_records[kmax].chi) kmax = k;
        if (std::abs(chi_records[k].chi) < std::abs(chi_records[kmid].chi))
          kmid = k;
      }
      snapshot_ks = {kmin, kmid, kmax};
      std::sort(snapshot_ks.begin(), snapshot_ks.end());
      snapshot_ks.erase(std::unique(snapshot_ks.begin(), snapshot_ks.end()),
                        snapshot_ks.end());
    }
    std::vector<std::string> outputs{"otoc_series.csv", "profiles.csv",
                                     "otoc.meta.json"};
    for (int k : snapshot_ks) {
      for (long t : cfg_.snapshot_times) {
        const auto field = otoc_field(spec, table, k, t);
        std::string csv = "p,q,otoc\n";
        for (int p = 0; p < field.grid.n; ++p)
          for (int q = 0; q < field.grid.n; ++q)
            csv += std::to_string(p) + "," + std::to_string(q) + "," +
                   format_double(field.values(field.grid.index(p, q))) + "\n";
        const std::string name = "snapshots/otoc_field_k" + std::to_string(k) +
                                 "_t" + std::to_string(t) + ".csv";
        write_text_file(dir_ / name, csv);
        outputs.push_back(name);
      }
    }

    json meta;
    meta["grid_n"] = cfg_.grid_n;
    meta["tau"] = tau;
    meta["t0"] = cfg_.t0;
    meta["t_window"] = cfg_.t_window;
    meta["sampled_times"] = times.size();
    meta["snapshot_states"] = snapshot_ks;
    meta["snapshot_times"] = cfg_.snapshot_times;
    meta["observable"] = cfg_.observable;
    meta["degeneracy_warning"] = spec.has_degeneracies();
    write_json_file(dir_ / "otoc.meta.json", meta);
    return outputs;
  }

  std::vector<std::string> analyze_stage() {
    require("profiles.csv", "otoc");
    const CsvTable table = read_csv(dir_ / "profiles.csv");
    const int cc = table.column("chi"), gc = table.column("gamma"),
              bc = table.column("cbar_numeric"), sc = table.column("spin");
    std::vector<double> chi, gamma, cbar;
    double spin = cfg_.spin;
    for (const auto& row : table.rows) {
      chi.push_back(std::stod(row[cc]));
      gamma.push_back(std::stod(row[gc]));
      cbar.push_back(std::stod(row[bc]));
      spin = std::stod(row[sc]);
    }
    if (chi.empty()) throw std::runtime_error("profiles.csv has no rows");
    const double weight_total = 2.0 * spin + 1.0;

    auto dump_histogram = [&](const std::string& name,
                              const std::vector<double>& values) {
      const Histogram h = histogram(values, cfg_.histogram_bins, weight_total);
      std::string csv = "bin_left,bin_right,density\n";
      for (int b = 0; b < h.density.size(); ++b)
        csv += format_double(h.edges(b)) + "," + format_double(h.edges(b + 1)) +
               "," + format_double(h.density(b)) + "\n";
      write_text_file(dir_ / "histograms" / (name + ".csv"), csv);
      int top = 0;
      for (int b = 1; b < h.density.size(); ++b)
        if (h.density(b) > h.density(top)) top = b;
      return 0.5 * (h.edges(top) + h.edges(top + 1));
    };

    json report;
    report["spin"] = spin;
    report["samples"] = chi.size();
    report["peaks"]["chi"] = dump_histogram("chi", chi);
    report["peaks"]["gamma"] = dump_histogram("gamma", gamma);
    report["peaks"]["cbar"] = dump_histogram("cbar", cbar);
    auto record = [&](const char* key, const std::vector<double>& u,
                      const std::vector<double>& v, const char* un,
                      const char* vn) {
      try {
        report[key] = pearson(u, v, un, vn).r_p;
      } catch (const std::exception& e) {
        report[key] = nullptr;
        report["undefined"][key] = e.what();
      }
    };
    record("r_p_chi_gamma", chi, gamma, "chi", "gamma");
    record("r_p_chi_cbar", chi, cbar, "chi", "cbar");
    write_json_file(dir_ / "correlations.json", report);
    return {"histograms/chi.csv", "histograms/gamma.csv",
            "histograms/cbar.csv", "correlations.json"};
  }
};

// correlation sweep over profile tables from different system sizes
inline std::vector<SweepEntry> sweep_from_profiles(
    const std::vector<fs::path>& profile_paths) {
  std::vector<ProfileSet> sets;
  for (const auto& path : profile_paths) {
    const CsvTable table = read_csv(path);
    const int cc = table.column("chi"), gc = table.column("gamma"),
              bc = table.column("cbar_numeric"), sc = table.column("spin");
    ProfileSet set;
    for (const auto& row : table.rows) {
      set.chi.push_back(std::stod(row[cc]));
      set.gamma.push_back(std::stod(row[gc]));
      set.cbar.push_back(std::stod(row[bc]));
      set.spin = std::stod(row[sc]);
    }
    sets.push_back(std::move(set));
  }
  return correlation_sweep(sets);
}

}  // namespace kicktop
