#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "milac/milac.hpp"
#include "test_util.hpp"

using namespace milac;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" MILAC_SIM_BINARY "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ExperimentConfig small(Command c) {
  ExperimentConfig cfg = ExperimentConfig::defaults_for(c);
  cfg.k = 2;
  cfg.l = 4;
  cfg.l_list = {2, 4};
  cfg.realizations = 2;
  cfg.snr_db_list = c == Command::ArraySweep ? std::vector<double>{10} : std::vector<double>{0, 10};
  return cfg;
}

}  // namespace

TEST(ExperimentConfig, Defaults) {
  const auto sweep = ExperimentConfig::defaults_for(Command::SnrSweep);
  EXPECT_EQ(sweep.k, 4);
  EXPECT_EQ(sweep.l, 16);
  EXPECT_EQ(sweep.realizations, 100);
  EXPECT_EQ(sweep.base_seed, 42u);
  EXPECT_EQ(sweep.snr_db_list, (std::vector<double>{0, 5, 10, 15, 20}));
  EXPECT_EQ(sweep.digital.mode, DigitalBudgetMode::Quarter);
  const auto conv = ExperimentConfig::defaults_for(Command::Convergence);
  EXPECT_EQ(conv.snr_db_list, (std::vector<double>{0, 10, 20}));
  EXPECT_EQ(conv.realizations, 1);
}

TEST(ExperimentConfig, Validation) {
  auto cfg = small(Command::SnrSweep);
  cfg.snr_db_list.clear();
  EXPECT_MILAC_ERROR(snr_sweep(cfg), ErrorCode::InvalidConfig);
  cfg = small(Command::ArraySweep);
  cfg.l_list = {1, 4};
  EXPECT_MILAC_ERROR(array_sweep(cfg), ErrorCode::InvalidConfig);
  cfg = small(Command::SnrSweep);
  cfg.realizations = 0;
  EXPECT_MILAC_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
  cfg = small(Command::SnrSweep);
  cfg.snr_db_list = {std::nan("")};
  EXPECT_MILAC_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
}

TEST(DigitalBudget, ParseAndScale) {
  EXPECT_EQ(DigitalBudget::parse("quarter").for_source_power(8.0), 2.0);
  const auto abs = DigitalBudget::parse("absolute:3.5");
  EXPECT_EQ(abs.for_source_power(8.0), 3.5);
  EXPECT_EQ(abs.describe(), "absolute:3.5");
  EXPECT_MILAC_ERROR(DigitalBudget::parse("absolute:-1"), ErrorCode::InvalidConfig);
  EXPECT_MILAC_ERROR(DigitalBudget::parse("half"), ErrorCode::InvalidConfig);
}

TEST(Seeds, RealizationChannelsArePureFunctionsOfSeed) {
  EXPECT_EQ(realization_channel(2, 4, ChannelModel::Rayleigh, 43), generate_rayleigh(2, 4, 43));
  EXPECT_EQ(realization_channel(2, 4, ChannelModel::Orthogonal, 43), orthogonalize(generate_rayleigh(2, 4, 43)));
  EXPECT_NE(init_seed(43), 43u);
  EXPECT_DOUBLE_EQ(snr_to_power(10.0), 10.0);
  EXPECT_DOUBLE_EQ(snr_to_power(0.0), 1.0);
}

TEST(ParallelMap, OrderedAndDeterministic) {
  const auto a = parallel_map(37, 1, [](std::size_t i) { return i * i; });
  const auto b = parallel_map(37, 4, [](std::size_t i) { return i * i; });
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], i * i);
  EXPECT_THROW(parallel_map(5, 3, [](std::size_t i) -> int {
                 if (i >= 2) fail(ErrorCode::NumericalFailure, "boom");
                 return 0;
               }),
               Error);
}

TEST(SnrSweep, RowsAndSchema) {
  auto cfg = small(Command::SnrSweep);
  const auto res = snr_sweep(cfg);
  ASSERT_EQ(res.rows.size(), 2u);
  ASSERT_EQ(res.realizations.size(), 4u);
  for (const auto& o : res.realizations) {
    EXPECT_LE(o.milac_rate, o.digital_rate * (1 + 1e-6));
    EXPECT_LE(o.unitary_residual, 1e-8 * 6);
  }
  const double mean0 = 0.5 * (res.realizations[0].milac_rate + res.realizations[1].milac_rate);
  EXPECT_NEAR(res.rows[0].milac_rate_mean, mean0, 1e-12);
  const auto csv = lines_of(sweep_csv(cfg, res));
  ASSERT_EQ(csv.size(), 4u);
  EXPECT_EQ(csv[0].rfind("# milac-sim v1 {", 0), 0u);
  EXPECT_EQ(csv[1], kSweepHeader);
  const auto json = nlohmann::json::parse(csv[0].substr(std::string("# milac-sim v1 ").size()));
  EXPECT_EQ(json["k"], 2);
  EXPECT_EQ(json["seed"], 42);
}

TEST(Convergence, MonotoneTracesAndSchema) {
  auto cfg = small(Command::Convergence);
  const auto runs = run_convergence(cfg);
  ASSERT_EQ(runs.size(), 4u);
  for (const auto& r : runs) {
    const auto& t = r.run.result.trace;
    EXPECT_TRUE(r.run.result.converged);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_GE(t[i].sum_rate_bits, t[i - 1].sum_rate_bits - 1e-7);
    const double last = t.back().sum_rate_bits, prev = t[t.size() - 2].sum_rate_bits;
    EXPECT_LE(std::abs(last - prev), 1e-4 * std::max(1.0, prev));
  }
  const auto csv = lines_of(convergence_csv(cfg, runs));
  EXPECT_EQ(csv[1], kTraceHeader);
  EXPECT_EQ(csv[2].rfind("# snr_db=0 realization=0 seed=42", 0), 0u);
}

TEST(Cli, DeterministicAcrossThreadCounts) {
  TempDir dir;
  const std::string args = " snr-sweep --k 2 --l 4 --snr-db-list 0,10 --realizations 3 --seed 7 --out ";
  ASSERT_EQ(run_cli(args + dir.file("a.csv"), "MILAC_SIM_THREADS=1"), 0);
  ASSERT_EQ(run_cli(args + dir.file("b.csv"), "MILAC_SIM_THREADS=3"), 0);
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("b.csv")));
  EXPECT_EQ(slurp(dir.file("a.csv.realizations.csv")), slurp(dir.file("b.csv.realizations.csv")));
  EXPECT_FALSE(slurp(dir.file("a.csv")).empty());

  const std::string conv = " convergence --k 2 --l 4 --realizations 2 --out ";
  ASSERT_EQ(run_cli(conv + dir.file("c.csv"), "MILAC_SIM_THREADS=1"), 0);
  ASSERT_EQ(run_cli(conv + dir.file("d.csv"), "MILAC_SIM_THREADS=2"), 0);
  EXPECT_EQ(slurp(dir.file("c.csv")), slurp(dir.file("d.csv")));
}

TEST(Cli, InvalidConfigurationsExitWithTwo) {
  TempDir dir;
  EXPECT_EQ(run_cli("array-sweep --k 4 --l-list 2,8 --realizations 1 --out " + dir.file("x.csv")), 2);
  EXPECT_EQ(run_cli("snr-sweep --realizations 0"), 2);
  EXPECT_EQ(run_cli("snr-sweep --channel rician"), 2);
  EXPECT_EQ(run_cli("snr-sweep --variant other"), 2);
  EXPECT_EQ(run_cli("snr-sweep --digital-budget half"), 2);
  EXPECT_EQ(run_cli("snr-sweep --snr-db 1 --snr-db-list 1,2"), 2);
  EXPECT_EQ(run_cli("nonsense"), 2);
  EXPECT_EQ(run_cli(""), 2);
}

TEST(Cli, OutputWriteFailureIsIoError) {
  EXPECT_EQ(run_cli("snr-sweep --k 1 --l 2 --snr-db 0 --realizations 1 --out /nonexistent/dir/out.csv"), 1);
}

TEST(Cli, SynthesizeExamples) {
  TempDir dir;
  save_matrix(dir.file("id.mat"), ComplexMatrix::Identity(3, 3));
  ASSERT_EQ(run_cli("synthesize " + dir.file("id.mat") + " --out " + dir.file("id.csv")), 0);
  for (const auto& line : lines_of(slurp(dir.file("id.csv")))) EXPECT_EQ(line, "0,0,0");

  save_matrix(dir.file("neg.mat"), -ComplexMatrix::Identity(3, 3));
  EXPECT_EQ(run_cli("synthesize " + dir.file("neg.mat")), 3);

  std::ofstream(dir.file("bad.mat")) << "garbage\n";
  EXPECT_EQ(run_cli("synthesize " + dir.file("bad.mat")), 2);
  EXPECT_EQ(run_cli("synthesize " + dir.file("missing.mat")), 1);
}

TEST(Cli, SynthesizeConvergedRunRoundTrips) {
  TempDir dir;
  ASSERT_EQ(run_cli("convergence --k 2 --l 4 --snr-db 10 --out " + dir.file("t.csv") + " --theta-out " + dir.file("theta.mat")), 0);
  ASSERT_EQ(run_cli("synthesize " + dir.file("theta.mat") + " --z0 50 --out " + dir.file("b.csv")), 0);
  const ComplexMatrix theta = load_matrix(dir.file("theta.mat"));
  RealMatrix branch(6, 6);
  const auto rows = lines_of(slurp(dir.file("b.csv")));
  ASSERT_EQ(rows.size(), 6u);
  for (Index r = 0; r < 6; ++r) {
    std::istringstream in(rows[static_cast<std::size_t>(r)]);
    std::string cell;
    for (Index c = 0; c < 6; ++c) {
      ASSERT_TRUE(std::getline(in, cell, ','));
      branch(r, c) = std::stod(cell);
    }
  }
  const auto rebuilt = scattering_from_susceptance(assemble_susceptance(branch), ReferenceImpedance{50.0});
  EXPECT_LE((rebuilt.theta - theta).norm(), 1e-8 * theta.norm());
}

TEST(Cli, ChannelFileDrivesConvergence) {
  TempDir dir;
  save_channels(dir.file("h.chan"), generate_rayleigh(2, 3, 5));
  ASSERT_EQ(run_cli("convergence --k 2 --l 3 --snr-db 10 --channel-file " + dir.file("h.chan") + " --out " + dir.file("t.csv")), 0);
  const auto lines = lines_of(slurp(dir.file("t.csv")));
  ASSERT_GE(lines.size(), 4u);
  EXPECT_EQ(lines[2].rfind("# snr_db=10 realization=0 seed=5", 0), 0u);
}
