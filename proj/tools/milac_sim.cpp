// milac-sim: command-line front end for the MiLAC beamforming experiments.
//
//   milac_sim convergence  [options]   per-iteration traces
//   milac_sim snr-sweep    [options]   sum rate versus transmit SNR
//   milac_sim array-sweep  [options]   sum rate versus number of antennas
//   milac_sim synthesize   THETA_FILE  branch susceptances for a network
//
// Exit codes: 0 success, 1 I/O error, 2 invalid configuration or input,
// 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "milac/milac.hpp"

namespace {

int exit_code_for(milac::ErrorCode code) {
  using milac::ErrorCode;
  switch (code) {
    case ErrorCode::Io: return 1;
    case ErrorCode::InvalidConfig:
    case ErrorCode::MalformedFile:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NotSymmetric:
    case ErrorCode::InvalidScattering: return 2;
    default: return 3;
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) milac::fail(milac::ErrorCode::Io, "cannot open " + path + " for writing");
  out << text;
  if (!out) milac::fail(milac::ErrorCode::Io, "write failed for " + path);
}

struct Options {
  long long k = 0;
  long long l = 0;
  std::vector<long long> l_list;
  double snr_db = 0.0;
  std::vector<double> snr_db_list;
  std::string channel = "rayleigh";
  int realizations = 0;
  unsigned long long seed = 0;
  double tol = 0.0;
  int inner_iters = 0;
  int max_outer = 0;
  std::string variant = "consistent";
  std::string digital_budget = "quarter";
  std::string channel_file;
  std::string theta_out;
  std::string out = "-";
};

struct Flags {
  CLI::Option* k;
  CLI::Option* l;
  CLI::Option* l_list;
  CLI::Option* snr_db;
  CLI::Option* snr_db_list;
  CLI::Option* channel;
  CLI::Option* realizations;
  CLI::Option* seed;
  CLI::Option* tol;
  CLI::Option* inner_iters;
  CLI::Option* max_outer;
  CLI::Option* variant;
  CLI::Option* digital_budget;
};

Flags add_experiment_flags(CLI::App* app, Options& o, bool array) {
  Flags f{};
  f.k = app->add_option("--k", o.k, "number of users / RF chains");
  if (array) {
    f.l = nullptr;
    f.l_list = app->add_option("--l-list", o.l_list, "antenna counts to sweep")->delimiter(',');
  } else {
    f.l = app->add_option("--l", o.l, "number of transmit antennas");
    f.l_list = nullptr;
  }
  f.snr_db = app->add_option("--snr-db", o.snr_db, "single transmit SNR in dB");
  f.snr_db_list = app->add_option("--snr-db-list", o.snr_db_list, "transmit SNRs in dB")->delimiter(',');
  f.snr_db->excludes(f.snr_db_list);
  f.channel = app->add_option("--channel", o.channel, "channel model")->check(CLI::IsMember({"rayleigh", "orthogonal"}));
  f.realizations = app->add_option("--realizations", o.realizations, "Monte-Carlo realizations");
  f.seed = app->add_option("--seed", o.seed, "base seed; realization r uses seed + r");
  f.tol = app->add_option("--tol", o.tol, "relative outer convergence tolerance");
  f.inner_iters = app->add_option("--inner-iters", o.inner_iters, "inner scattering iterations per outer step");
  f.max_outer = app->add_option("--max-outer", o.max_outer, "cap on outer iterations");
  f.variant = app->add_option("--variant", o.variant, "surrogate variant")->check(CLI::IsMember({"consistent", "literal"}));
  f.digital_budget = app->add_option("--digital-budget", o.digital_budget, "quarter | absolute:<watts>");
  app->add_option("--out", o.out, "output CSV path ('-' for stdout)");
  return f;
}

milac::ExperimentConfig build_config(milac::Command cmd, const Options& o, const Flags& f) {
  milac::ExperimentConfig cfg = milac::ExperimentConfig::defaults_for(cmd);
  auto take = [&](CLI::Option* opt, const char* name, auto apply) {
    if (opt && opt->count() > 0) {
      apply();
    } else if (opt) {
      cfg.defaulted.emplace_back(name);
    }
  };
  take(f.k, "k", [&] { cfg.k = o.k; });
  take(f.l, "l", [&] { cfg.l = o.l; });
  take(f.l_list, "l_list", [&] { cfg.l_list.assign(o.l_list.begin(), o.l_list.end()); });
  if (f.snr_db->count() > 0) {
    cfg.snr_db_list = {o.snr_db};
  } else if (f.snr_db_list->count() > 0) {
    cfg.snr_db_list = o.snr_db_list;
  } else {
    cfg.defaulted.emplace_back("snr_db");
  }
  take(f.channel, "channel", [&] { cfg.channel = milac::parse_channel_model(o.channel); });
  take(f.realizations, "realizations", [&] { cfg.realizations = o.realizations; });
  take(f.seed, "seed", [&] { cfg.base_seed = o.seed; });
  take(f.tol, "tol", [&] { cfg.optimizer.outer_tolerance = o.tol; });
  take(f.inner_iters, "inner_iters", [&] { cfg.optimizer.inner_iterations = o.inner_iters; });
  take(f.max_outer, "max_outer", [&] { cfg.optimizer.max_outer_iterations = o.max_outer; });
  take(f.variant, "variant", [&] { cfg.optimizer.variant = milac::parse_variant(o.variant); });
  take(f.digital_budget, "digital_budget", [&] { cfg.digital = milac::DigitalBudget::parse(o.digital_budget); });
  cfg.channel_file = o.channel_file;
  cfg.threads = milac::threads_from_env();
  return cfg;
}

std::string sidecar_path(const std::string& out) { return out + ".realizations.csv"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MiLAC multi-user beamforming simulator"};
  app.require_subcommand(1);

  Options conv_opt, snr_opt, arr_opt;
  auto* conv = app.add_subcommand("convergence", "trace the optimizer per outer iteration");
  const Flags conv_flags = add_experiment_flags(conv, conv_opt, false);
  conv->add_option("--channel-file", conv_opt.channel_file, "load the channel instead of generating it")->check(CLI::ExistingFile);
  conv->add_option("--theta-out", conv_opt.theta_out, "write the first run's final scattering matrix here");

  auto* snr = app.add_subcommand("snr-sweep", "MiLAC vs digital sum rate over transmit SNR");
  const Flags snr_flags = add_experiment_flags(snr, snr_opt, false);

  auto* arr = app.add_subcommand("array-sweep", "MiLAC vs digital sum rate over antenna count");
  const Flags arr_flags = add_experiment_flags(arr, arr_opt, true);

  std::string theta_file;
  double z0 = milac::kDefaultZ0;
  std::string synth_out = "-";
  auto* synth = app.add_subcommand("synthesize", "branch susceptances (siemens) realizing a scattering matrix");
  synth->add_option("theta_file", theta_file, "scattering matrix file (MILAC-MAT v1)")->required();
  synth->add_option("--z0", z0, "reference impedance in ohms");
  synth->add_option("--out", synth_out, "output CSV path ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*conv) {
      milac::ExperimentConfig cfg = build_config(milac::Command::Convergence, conv_opt, conv_flags);
      const auto runs = milac::run_convergence(cfg);
      write_output(conv_opt.out, milac::convergence_csv(cfg, runs));
      if (!conv_opt.theta_out.empty()) milac::save_matrix(conv_opt.theta_out, runs.front().run.result.theta.theta);
    } else if (*snr || *arr) {
      const bool is_snr = static_cast<bool>(*snr);
      const Options& o = is_snr ? snr_opt : arr_opt;
      milac::ExperimentConfig cfg = is_snr ? build_config(milac::Command::SnrSweep, o, snr_flags)
                                           : build_config(milac::Command::ArraySweep, o, arr_flags);
      const milac::SweepResult res = is_snr ? milac::snr_sweep(cfg) : milac::array_sweep(cfg);
      write_output(o.out, milac::sweep_csv(cfg, res));
      if (!o.out.empty() && o.out != "-") write_output(sidecar_path(o.out), milac::realizations_csv(cfg, res));
    } else if (*synth) {
      write_output(synth_out, milac::branches_csv(milac::synthesize_from_file(theta_file, z0)));
    }
  } catch (const milac::Error& e) {
    std::cerr << "milac_sim: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "milac_sim: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
