// Command-line driver for the kicked-top OTOC pipeline.  Subcommands map
// one-to-one onto pipeline stages; `run` (alias `all`) executes the full
// chain.  Flags override values from an optional JSON config file.
// Exit codes: 0 success, 1 usage/config error, 2 stage failure.

#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "kicktop/pipeline.hpp"

using namespace kicktop;

namespace {

struct FlagValues {
  double spin = 0.0, alpha = 0.0, kappa = 0.0;
  int grid_n = 0, threads = 0, k = 0;
  long mask_kicks = 0, t0 = 0, t_window = 0, tau = 0;
  std::uint64_t seed = 0;
  std::string snapshots, thresholds, observable, out, config_file;
  bool full_fidelity = false;
  std::vector<int> export_fields;
  std::vector<std::string> profile_files;
};

std::vector<long> parse_long_list(const std::string& text) {
  std::vector<long> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) out.push_back(std::stol(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kicktop: kicked-top eigenstate classification and OTOC pipeline"};
  app.set_version_flag("--version", std::string("kicktop ") + kVersion);
  app.fallthrough();

  FlagValues flags;
  auto* s_opt = app.add_option("--S", flags.spin, "spin magnitude S (half-integer)");
  auto* alpha_opt = app.add_option("--alpha", flags.alpha, "precession angle");
  auto* kappa_opt = app.add_option("--kappa", flags.kappa, "kick strength");
  auto* grid_opt = app.add_option("--grid-n", flags.grid_n, "phase-space grid size N");
  auto* kicks_opt = app.add_option("--mask-kicks", flags.mask_kicks,
                                   "kicks for the chaotic-mask orbit");
  auto* seed_opt = app.add_option("--seed", flags.seed, "random seed");
  auto* t0_opt = app.add_option("--t0", flags.t0, "long-time window start");
  auto* tw_opt = app.add_option("--T", flags.t_window, "long-time window length");
  auto* tau_opt = app.add_option("--tau", flags.tau,
                                 "override the growth window nint(ln(2S+1))");
  auto* snap_opt = app.add_option("--snapshots", flags.snapshots,
                                  "comma-separated snapshot kick times");
  auto* thr_opt = app.add_option("--thresholds", flags.thresholds,
                                 "chi_regular,chi_chaotic classification cut");
  auto* obs_opt = app.add_option("--observable", flags.observable,
                                 "OTOC observable, sx or sy");
  auto* out_opt = app.add_option("--out", flags.out, "output directory");
  auto* threads_opt = app.add_option("--threads", flags.threads,
                                     "worker threads (0 = all available)");
  auto* ff_flag = app.add_flag("--full-fidelity", flags.full_fidelity,
                               "raise the mask orbit to 1e8 kicks");
  app.add_option("--config", flags.config_file, "JSON config file (flags override)");

  app.require_subcommand(1);
  auto* cmd_run = app.add_subcommand("run", "run the full pipeline");
  auto* cmd_all = app.add_subcommand("all", "alias for run");
  auto* cmd_poincare = app.add_subcommand("poincare", "classical Poincare section");
  auto* cmd_mask = app.add_subcommand("mask", "chaotic/regular cell mask");
  auto* cmd_spectrum = app.add_subcommand("spectrum", "Floquet spectrum");
  auto* cmd_chi = app.add_subcommand("chi", "Husimi overlap index and labels");
  cmd_chi->add_option("--export-field", flags.export_fields,
                      "also write the Husimi field of eigenstate k (repeatable)");
  auto* cmd_otoc = app.add_subcommand("otoc", "OTOC series and profiles");
  auto* k_opt = cmd_otoc->add_option("--k", flags.k, "restrict output to one eigenstate");
  auto* cmd_analyze = app.add_subcommand("analyze", "histograms and correlations");
  cmd_analyze->add_option("profiles", flags.profile_files,
                          "extra profiles.csv files: emit a correlation sweep "
                          "across system sizes instead of the stage outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 1;
  }

  ExperimentConfig cfg;
  try {
    if (!flags.config_file.empty())
      cfg = config_from_json(read_json_file(flags.config_file));
    if (s_opt->count()) cfg.spin = flags.spin;
    if (alpha_opt->count()) cfg.alpha = flags.alpha;
    if (kappa_opt->count()) cfg.kappa = flags.kappa;
    if (grid_opt->count()) cfg.grid_n = flags.grid_n;
    if (kicks_opt->count()) cfg.mask_kicks = flags.mask_kicks;
    if (seed_opt->count()) cfg.seed = flags.seed;
    if (t0_opt->count()) cfg.t0 = flags.t0;
    if (tw_opt->count()) cfg.t_window = flags.t_window;
    if (tau_opt->count()) cfg.tau_override = flags.tau;
    if (snap_opt->count()) cfg.snapshot_times = parse_long_list(flags.snapshots);
    if (thr_opt->count()) {
      const std::string& text = flags.thresholds;
      const std::size_t comma = text.find(',');
      if (comma == std::string::npos)
        throw std::invalid_argument("--thresholds expects chi_reg,chi_cha");
      cfg.chi_regular = std::stod(text.substr(0, comma));
      cfg.chi_chaotic = std::stod(text.substr(comma + 1));
    }
    if (obs_opt->count()) cfg.observable = flags.observable;
    if (out_opt->count()) cfg.output_dir = flags.out;
    if (threads_opt->count()) cfg.threads = flags.threads;
    if (ff_flag->count()) cfg.full_fidelity = true;
    if (k_opt->count()) cfg.only_k = flags.k;

    for (const auto& warning : validate_config(cfg))
      std::fprintf(stderr, "[kicktop] warning: %s\n", warning.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kicktop: %s\n", e.what());
    return 1;
  }

  if (cfg.threads > 0) {
    omp_set_num_threads(cfg.threads);
    Eigen::setNbThreads(cfg.threads);
  }

  try {
    Pipeline pipeline(cfg, [](const std::string& msg) {
      std::fprintf(stderr, "%s\n", msg.c_str());
    });
    if (cmd_run->parsed() || cmd_all->parsed()) {
      pipeline.run_all();
    } else if (cmd_poincare->parsed()) {
      pipeline.run_stage("poincare");
    } else if (cmd_mask->parsed()) {
      pipeline.run_stage("mask");
    } else if (cmd_spectrum->parsed()) {
      pipeline.run_stage("spectrum");
    } else if (cmd_chi->parsed()) {
      pipeline.run_stage("chi");
      if (!flags.export_fields.empty()) {
        const auto spec = pipeline.load_spectrum();
        const auto table = coherent_table_eigenbasis(spec, PhaseGrid(cfg.grid_n));
        for (int k : flags.export_fields) {
          if (k < 0 || k >= spec.dim)
            throw StageError("chi", "field export k out of range");
          const auto field = husimi_field_of(table, k);
          std::string csv = "p,q,husimi\n";
          for (int p = 0; p < field.grid.n; ++p)
            for (int q = 0; q < field.grid.n; ++q)
              csv += std::to_string(p) + "," + std::to_string(q) + "," +
                     format_double(field.values(field.grid.index(p, q))) + "\n";
          write_text_file(pipeline.dir() /
                              ("husimi_field_k" + std::to_string(k) + ".csv"),
                          csv);
        }
      }
    } else if (cmd_otoc->parsed()) {
      pipeline.run_stage("otoc");
    } else if (cmd_analyze->parsed()) {
      if (!flags.profile_files.empty()) {
        std::vector<fs::path> paths(flags.profile_files.begin(),
                                    flags.profile_files.end());
        const auto sweep = sweep_from_profiles(paths);
        std::string csv = "spin,r_p_chi_gamma,r_p_chi_cbar\n";
        for (const auto& entry : sweep)
          csv += format_double(entry.spin) + "," +
                 format_double(entry.r_chi_gamma) + "," +
                 format_double(entry.r_chi_cbar) + "\n";
        write_text_file(fs::path(cfg.output_dir) / "correlation_sweep.csv", csv);
        std::fprintf(stderr, "[kicktop] correlation sweep over %zu profile sets\n",
                     sweep.size());
      } else {
        pipeline.run_stage("analyze");
      }
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "kicktop: stage failed: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kicktop: %s\n", e.what());
    return 2;
  }
  return 0;
}
