#pragma once

// Seeded Monte-Carlo harness: convergence traces, sum rate versus SNR and
// versus array size, and circuit synthesis export. Every command renders to
// a CSV string whose bytes depend only on the configuration.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "milac/baselines.hpp"
#include "milac/channels.hpp"
#include "milac/error.hpp"
#include "milac/evaluation.hpp"
#include "milac/microwave.hpp"
#include "milac/optimizer.hpp"

namespace milac {

enum class DigitalBudgetMode { Quarter, Absolute };

/// Power budget handed to the digital baseline: P_t / 4 to match the MiLAC
/// radiated-power normalization, or a fixed number of watts.
struct DigitalBudget {
  DigitalBudgetMode mode = DigitalBudgetMode::Quarter;
  double watts = 0.0;

  double for_source_power(double p_t) const { return mode == DigitalBudgetMode::Quarter ? 0.25 * p_t : watts; }

  std::string describe() const;
  static DigitalBudget parse(const std::string& text);
};

inline std::string DigitalBudget::describe() const {
  if (mode == DigitalBudgetMode::Quarter) return "quarter";
  char buf[64];
  std::snprintf(buf, sizeof buf, "absolute:%.17g", watts);
  return buf;
}

inline DigitalBudget DigitalBudget::parse(const std::string& text) {
  if (text == "quarter") return {};
  const std::string prefix = "absolute:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string value = text.substr(prefix.size());
    char* end = nullptr;
    const double watts = std::strtod(value.c_str(), &end);
    if (!value.empty() && end && *end == '\0' && watts > 0.0 && std::isfinite(watts)) return {DigitalBudgetMode::Absolute, watts};
  }
  fail(ErrorCode::InvalidConfig, "digital budget must be 'quarter' or 'absolute:<watts>' with watts > 0");
}

enum class Command { Convergence, SnrSweep, ArraySweep };

inline std::string to_string(Command c) {
  switch (c) {
    case Command::Convergence: return "convergence";
    case Command::SnrSweep: return "snr-sweep";
    case Command::ArraySweep: return "array-sweep";
  }
  return "unknown";
}

struct ExperimentConfig {
  Command command = Command::SnrSweep;
  Index k = 4;
  Index l = 16;
  std::vector<Index> l_list{8, 16, 32, 64, 128};
  std::vector<double> snr_db_list{0, 5, 10, 15, 20};
  ChannelModel channel = ChannelModel::Rayleigh;
  int realizations = 100;
  std::uint64_t base_seed = 42;
  OptimizerConfig optimizer;
  DigitalBudget digital;
  std::string channel_file;               // convergence only; replaces generation
  std::vector<std::string> defaulted;     // fields the user did not set
  unsigned threads = 1;                   // not part of provenance

  static ExperimentConfig defaults_for(Command c) {
    ExperimentConfig cfg;
    cfg.command = c;
    if (c == Command::Convergence) {
      cfg.snr_db_list = {0, 10, 20};
      cfg.realizations = 1;
    } else if (c == Command::ArraySweep) {
      cfg.snr_db_list = {10};
    }
    return cfg;
  }

  void validate() const {
    optimizer.validate();
    if (k < 1) fail(ErrorCode::InvalidConfig, "k must be >= 1");
    if (realizations < 1) fail(ErrorCode::InvalidConfig, "realizations must be >= 1");
    if (snr_db_list.empty()) fail(ErrorCode::InvalidConfig, "SNR list is empty");
    for (double s : snr_db_list)
      if (!std::isfinite(s)) fail(ErrorCode::InvalidConfig, "SNR values must be finite");
    if (command == Command::ArraySweep) {
      if (snr_db_list.size() != 1) fail(ErrorCode::InvalidConfig, "array-sweep takes a single SNR");
      if (l_list.empty()) fail(ErrorCode::InvalidConfig, "antenna list is empty");
      for (Index l : l_list)
        if (l < k) fail(ErrorCode::InvalidConfig, "every L in the antenna list must be >= K");
    } else if (l < 1) {
      fail(ErrorCode::InvalidConfig, "l must be >= 1");
    }
    if (channel == ChannelModel::Orthogonal && command != Command::ArraySweep && l < k)
      fail(ErrorCode::InvalidConfig, "orthogonal channels need L >= K");
    if (!channel_file.empty() && (command != Command::Convergence || realizations != 1))
      fail(ErrorCode::InvalidConfig, "a channel file is only accepted by convergence with one realization");
  }

  nlohmann::json provenance() const {
    nlohmann::json j;
    j["command"] = to_string(command);
    j["k"] = k;
    if (command == Command::ArraySweep) {
      j["l_list"] = l_list;
    } else {
      j["l"] = l;
    }
    j["snr_db"] = snr_db_list;
    j["channel"] = std::string(to_string(channel));
    j["realizations"] = realizations;
    j["seed"] = base_seed;
    j["optimizer"] = {{"inner_iterations", optimizer.inner_iterations},
                      {"outer_tolerance", optimizer.outer_tolerance},
                      {"max_outer_iterations", optimizer.max_outer_iterations},
                      {"variant", std::string(to_string(optimizer.variant))}};
    j["digital_budget"] = digital.describe();
    if (!channel_file.empty()) j["channel_file"] = channel_file;
    j["defaulted"] = defaulted;
    return j;
  }

  std::string provenance_line() const { return "# milac-sim v1 " + provenance().dump() + "\n"; }
};

inline double snr_to_power(double snr_db, double sigma2 = 1.0) { return sigma2 * std::pow(10.0, snr_db / 10.0); }

/// Seed for the random initial scattering matrix of a realization.
inline std::uint64_t init_seed(std::uint64_t channel_seed) { return channel_seed ^ 0x9E3779B97F4A7C15ULL; }

inline ChannelSet realization_channel(Index k, Index l, ChannelModel model, std::uint64_t seed) {
  ChannelSet h = generate_rayleigh(k, l, seed);
  return model == ChannelModel::Orthogonal ? orthogonalize(h) : h;
}

/// Cap from MILAC_SIM_THREADS, else the hardware concurrency.
inline unsigned threads_from_env() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MILAC_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    fail(ErrorCode::InvalidConfig, "MILAC_SIM_THREADS must be a positive integer");
  }
  return hw;
}

/// fn(i) for i in [0, count) on up to `threads` workers; results come back in
/// index order and the lowest-index exception is rethrown.
template <typename Fn>
auto parallel_map(std::size_t count, unsigned threads, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<std::optional<Result>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<Result> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Single realization

struct RealizationOutcome {
  double sweep_var = 0.0;
  int realization = 0;
  std::uint64_t seed = 0;
  double milac_rate = 0.0;
  double digital_rate = 0.0;
  double rel_gap = 0.0;  // (digital - milac) / digital
  double radiated_fraction = 0.0;
  double orthogonality = 0.0;
  double unitary_residual = 0.0;
  double symmetric_residual = 0.0;
  int outer_iterations = 0;
  bool converged = false;
};

struct MilacRun {
  ChannelSet channel;
  BcdResult result;
};

inline MilacRun run_milac(const ChannelSet& h, double snr_db, const OptimizerConfig& opt) {
  const double p_t = snr_to_power(snr_db);
  const NoisePowers noise = NoisePowers::uniform(h.users());
  const auto [theta0, p0] = initial_point(h.users(), h.antennas(), p_t, init_seed(h.seed));
  BcdResult res = run_bcd(h, noise, p_t, opt, theta0, p0);
  const ValidationReport v = validate_lossless_reciprocal(res.theta.theta);
  if (!v.pass || !res.power.feasible()) fail(ErrorCode::NumericalFailure, "optimizer produced an infeasible point");
  return {h, std::move(res)};
}

inline RealizationOutcome compare_realization(const ChannelSet& h, double snr_db, const OptimizerConfig& opt,
                                              const DigitalBudget& budget) {
  const double p_t = snr_to_power(snr_db);
  const NoisePowers noise = NoisePowers::uniform(h.users());
  const MilacRun milac = run_milac(h, snr_db, opt);
  const DigitalResult digital = fp_digital(h, noise, budget.for_source_power(p_t));
  RealizationOutcome o;
  o.seed = h.seed;
  o.milac_rate = milac.result.rates.sum_rate;
  o.digital_rate = digital.report.sum_rate;
  o.rel_gap = o.digital_rate > 0.0 ? (o.digital_rate - o.milac_rate) / o.digital_rate : 0.0;
  const PowerAccount acc = power_account(milac.result.theta, milac.result.power);
  o.radiated_fraction = acc.input_power > 0.0 ? acc.radiated / acc.input_power : 0.0;
  o.orthogonality = h.users() > 1 ? channel_orthogonality(h) : 0.0;
  const ValidationReport v = validate_lossless_reciprocal(milac.result.theta.theta);
  o.unitary_residual = v.unitary_residual;
  o.symmetric_residual = v.symmetric_residual;
  o.outer_iterations = static_cast<int>(milac.result.trace.size()) - 1;
  o.converged = milac.result.converged;
  return o;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  double sweep_var = 0.0;
  double milac_rate_mean = 0.0;
  double digital_rate_mean = 0.0;
  double rel_gap_mean = 0.0;
  double rel_gap_ci95 = 0.0;
  double radiated_fraction_mean = 0.0;
  double orthogonality_mean = 0.0;
  int n_realizations = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RealizationOutcome> realizations;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline SweepRow aggregate(double var, const std::vector<RealizationOutcome>& group) {
  SweepRow row;
  row.sweep_var = var;
  row.n_realizations = static_cast<int>(group.size());
  const double n = static_cast<double>(group.size());
  for (const auto& o : group) {
    row.milac_rate_mean += o.milac_rate / n;
    row.digital_rate_mean += o.digital_rate / n;
    row.rel_gap_mean += o.rel_gap / n;
    row.radiated_fraction_mean += o.radiated_fraction / n;
    row.orthogonality_mean += o.orthogonality / n;
  }
  if (group.size() > 1) {
    double ss = 0.0;
    for (const auto& o : group) ss += (o.rel_gap - row.rel_gap_mean) * (o.rel_gap - row.rel_gap_mean);
    row.rel_gap_ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return row;
}

inline SweepResult run_grid(const ExperimentConfig& cfg, const std::vector<double>& vars, bool vary_antennas) {
  const std::size_t reals = static_cast<std::size_t>(cfg.realizations);
  auto outcomes = parallel_map(vars.size() * reals, cfg.threads, [&](std::size_t task) {
    const std::size_t vi = task / reals;
    const int r = static_cast<int>(task % reals);
    const Index l = vary_antennas ? static_cast<Index>(vars[vi]) : cfg.l;
    const double snr = vary_antennas ? cfg.snr_db_list.front() : vars[vi];
    const ChannelSet h = realization_channel(cfg.k, l, cfg.channel, cfg.base_seed + static_cast<std::uint64_t>(r));
    RealizationOutcome o = compare_realization(h, snr, cfg.optimizer, cfg.digital);
    o.sweep_var = vars[vi];
    o.realization = r;
    return o;
  });
  SweepResult res;
  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    std::vector<RealizationOutcome> group(outcomes.begin() + static_cast<std::ptrdiff_t>(vi * reals),
                                          outcomes.begin() + static_cast<std::ptrdiff_t>((vi + 1) * reals));
    res.rows.push_back(aggregate(vars[vi], group));
  }
  res.realizations = std::move(outcomes);
  return res;
}

}  // namespace detail

inline SweepResult snr_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  return detail::run_grid(cfg, cfg.snr_db_list, false);
}

inline SweepResult array_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<double> vars(cfg.l_list.begin(), cfg.l_list.end());
  return detail::run_grid(cfg, vars, true);
}

inline constexpr const char* kSweepHeader =
    "sweep_var,milac_rate_mean,digital_rate_mean,rel_gap_mean,rel_gap_ci95,radiated_fraction_mean,orthogonality_mean,n_realizations";
inline constexpr const char* kRealizationHeader =
    "sweep_var,realization,seed,milac_rate,digital_rate,rel_gap,abs_rel_gap,radiated_fraction,orthogonality,unitary_residual,"
    "symmetric_residual,outer_iterations,converged";
inline constexpr const char* kTraceHeader = "iter,sum_rate_bits,fp_objective_nats,radiated_fraction,unitary_residual";

inline std::string sweep_csv(const ExperimentConfig& cfg, const SweepResult& res) {
  std::ostringstream out;
  out << cfg.provenance_line() << kSweepHeader << '\n';
  using detail::fmt;
  for (const auto& r : res.rows)
    out << fmt(r.sweep_var) << ',' << fmt(r.milac_rate_mean) << ',' << fmt(r.digital_rate_mean) << ',' << fmt(r.rel_gap_mean) << ','
        << fmt(r.rel_gap_ci95) << ',' << fmt(r.radiated_fraction_mean) << ',' << fmt(r.orthogonality_mean) << ',' << r.n_realizations
        << '\n';
  return out.str();
}

inline std::string realizations_csv(const ExperimentConfig& cfg, const SweepResult& res) {
  std::ostringstream out;
  out << cfg.provenance_line() << kRealizationHeader << '\n';
  using detail::fmt;
  for (const auto& o : res.realizations)
    out << fmt(o.sweep_var) << ',' << o.realization << ',' << o.seed << ',' << fmt(o.milac_rate) << ',' << fmt(o.digital_rate) << ','
        << fmt(o.rel_gap) << ',' << fmt(std::abs(o.rel_gap)) << ',' << fmt(o.radiated_fraction) << ',' << fmt(o.orthogonality) << ','
        << fmt(o.unitary_residual) << ',' << fmt(o.symmetric_residual) << ',' << o.outer_iterations << ',' << (o.converged ? 1 : 0)
        << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Convergence traces

struct ConvergenceRun {
  double snr_db = 0.0;
  int realization = 0;
  MilacRun run;
};

inline std::vector<ConvergenceRun> run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  std::optional<ChannelSet> fixed;
  if (!cfg.channel_file.empty()) {
    fixed = load_channels(cfg.channel_file);
    if (cfg.channel == ChannelModel::Orthogonal && fixed->model != ChannelModel::Orthogonal) fixed = orthogonalize(*fixed);
  }
  const std::size_t reals = static_cast<std::size_t>(cfg.realizations);
  return parallel_map(cfg.snr_db_list.size() * reals, cfg.threads, [&](std::size_t task) {
    const std::size_t si = task / reals;
    const int r = static_cast<int>(task % reals);
    const ChannelSet h = fixed ? *fixed : realization_channel(cfg.k, cfg.l, cfg.channel, cfg.base_seed + static_cast<std::uint64_t>(r));
    return ConvergenceRun{cfg.snr_db_list[si], r, run_milac(h, cfg.snr_db_list[si], cfg.optimizer)};
  });
}

inline std::string convergence_csv(const ExperimentConfig& cfg, const std::vector<ConvergenceRun>& runs) {
  std::ostringstream out;
  out << cfg.provenance_line() << kTraceHeader << '\n';
  using detail::fmt;
  for (const auto& run : runs) {
    out << "# snr_db=" << fmt(run.snr_db) << " realization=" << run.realization << " seed=" << run.run.channel.seed
        << " converged=" << (run.run.result.converged ? 1 : 0) << '\n';
    for (const auto& e : run.run.result.trace) {
      const double frac = e.input_power > 0.0 ? e.radiated_power / e.input_power : 0.0;
      out << e.iteration << ',' << fmt(e.sum_rate_bits) << ',' << fmt(e.fp_objective_nats) << ',' << fmt(frac) << ','
          << fmt(e.unitary_residual) << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Synthesis

/// Branch susceptances (siemens) realizing the scattering matrix in `path`.
inline RealMatrix synthesize_from_file(const std::string& path, double z0) {
  const ComplexMatrix theta = load_matrix(path);
  if (theta.rows() != theta.cols()) fail(ErrorCode::MalformedFile, path + ": scattering matrix is not square");
  if (!validate_lossless_reciprocal(theta).pass) fail(ErrorCode::MalformedFile, path + ": matrix is not symmetric unitary");
  const ReferenceImpedance ref(z0);
  return synthesize_branches(susceptance_from_scattering(ScatteringMatrix{theta, 0, theta.rows()}, ref));
}

inline std::string branches_csv(const RealMatrix& branch) {
  std::ostringstream out;
  char buf[48];
  for (Index r = 0; r < branch.rows(); ++r) {
    for (Index c = 0; c < branch.cols(); ++c) {
      const double v = branch(r, c) == 0.0 ? 0.0 : branch(r, c);  // no "-0"
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace milac
