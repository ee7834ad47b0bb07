#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "chaos/harness/cli.hpp"
#include "oracles.hpp"

using namespace chaos;
using namespace chaos::harness;

namespace {

/// A scratch directory removed with the fixture.
class TempDir {
public:
  TempDir() : path_(std::filesystem::temp_directory_path() / ("chaos-test-" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name, const std::string& contents = {}) const {
    const auto p = (path_ / name).string();
    if (!contents.empty()) std::ofstream(p) << contents;
    return p;
  }

private:
  std::filesystem::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "chaos-response");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string rows_csv(const SweepResult& r) {
  std::ostringstream os;
  write_rows(os, r.rows);
  return os.str();
}

RunConfig small_lorenz63_sweep() {
  RunConfig cfg;
  cfg.model = "lorenz63";
  cfg.method = "stats";
  cfg.steps = 4000;
  cfg.warmup = 500;
  cfg.grid = parse_grid("rho:26:30:3");
  cfg.ensemble = 2;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST(FdReference, ExactQuadratic) {
  std::vector<double> xs, ys;
  for (int i = 0; i <= 8; ++i) {
    const double x = 0.5 * i;
    xs.push_back(x);
    ys.push_back(3.0 + 2.0 * x - 0.5 * x * x);
  }
  const auto d = fd_reference(xs, ys, 2, {1.0, 3.0}, 0.0, 4.0);
  EXPECT_NEAR(d[0], 1.0, 1e-10);
  EXPECT_NEAR(d[1], -1.0, 1e-10);
  const auto fit = fit_polynomial(xs, ys, 2, 0.0, 4.0);
  EXPECT_NEAR(fit(2.5), 3.0 + 5.0 - 3.125, 1e-12);
  EXPECT_LT(fit.condition, 10.0);
}

TEST(FdReference, WindowSelectsPoints) {
  // A kink outside the window must not leak into the fit.
  std::vector<double> xs, ys;
  for (int i = 0; i <= 20; ++i) {
    xs.push_back(i);
    ys.push_back(i <= 10 ? 2.0 * i : 100.0 * i);
  }
  EXPECT_NEAR(fd_reference(xs, ys, 1, {5.0}, 0.0, 10.0)[0], 2.0, 1e-10);
}

TEST(FdReference, NoisyConstantHasSmallSlope) {
  CounterRng rng(3);
  std::vector<double> xs, ys;
  for (int i = 0; i < 41; ++i) {
    xs.push_back(i * 0.1);
    ys.push_back(5.0 + 1e-3 * rng.normal());
  }
  EXPECT_LT(std::abs(fd_reference(xs, ys, 1, {2.0}, 0.0, 4.0)[0]), 2e-3);
}

TEST(FdReference, Errors) {
  const std::vector<double> xs{0.0, 1.0, 2.0}, ys{1.0, 2.0, 3.0};
  EXPECT_THROW(fit_polynomial(xs, ys, 3, 0.0, 2.0), FitError);
  EXPECT_THROW(fit_polynomial(xs, ys, 1, 0.5, 0.9), FitError);
  EXPECT_THROW(fit_polynomial(xs, ys, 1, 2.0, 0.0), FitError);
  EXPECT_THROW(fit_polynomial(xs, {1.0}, 1, 0.0, 2.0), DimensionError);
  const std::vector<double> repeated{1.0, 1.0, 1.0, 1.0, 2.0};
  try {
    fit_polynomial(repeated, {1, 2, 3, 4, 5}, 3, 0.0, 2.0);
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos);
  }
}

TEST(Config, GridAndAssignmentParsing) {
  const auto g = parse_grid("rho:20:30:5");
  EXPECT_EQ(g.name, "rho");
  EXPECT_EQ(g.values(), (std::vector<double>{20.0, 22.5, 25.0, 27.5, 30.0}));
  EXPECT_EQ(parse_grid("F:8:8:1").values(), std::vector<double>{8.0});
  EXPECT_THROW(parse_grid("rho:30:20:5"), ConfigError);
  EXPECT_THROW(parse_grid("rho:20:30:0"), ConfigError);
  EXPECT_THROW(parse_grid("rho:20:30"), ConfigError);
  EXPECT_THROW(parse_grid("rho:a:30:5"), ConfigError);
  EXPECT_EQ(parse_assignment("rho=28.5"), (std::pair<std::string, double>{"rho", 28.5}));
  EXPECT_THROW(parse_assignment("=1"), ConfigError);
  EXPECT_THROW(parse_assignment("rho"), ConfigError);
}

TEST(Config, LoadsSectionsAndRejectsUnknownKeys) {
  TempDir dir;
  const auto good = dir.file("good.ini",
                             "[model]\nname = lorenz96\nn = 20\nF = 7.5\n"
                             "[integrator]\nscheme = rk2\ndt = 0.002\n"
                             "[method]\nmethod = reduced\nsteps = 1000\nmext = 9\n"
                             "[sweep]\ngrid = F:6:8:3\nensemble = 4\nseed = 9\n"
                             "[output]\nout = results.csv\n");
  const RunConfig cfg = load_config(good);
  EXPECT_EQ(cfg.model, "lorenz96");
  EXPECT_EQ(cfg.n, 20);
  ASSERT_EQ(cfg.params.size(), 1u);
  EXPECT_EQ(cfg.params[0].second, 7.5);
  EXPECT_EQ(cfg.scheme, "rk2");
  EXPECT_EQ(cfg.dt, 0.002);
  EXPECT_EQ(cfg.method, "reduced");
  EXPECT_EQ(cfg.mext, 9);
  EXPECT_EQ(cfg.grid->count, 3);
  EXPECT_EQ(cfg.ensemble, 4);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.out, "results.csv");

  EXPECT_THROW(load_config(dir.file("a.ini", "[modle]\nname = x\n")), ConfigError);
  EXPECT_THROW(load_config(dir.file("b.ini", "[method]\nstep = 10\n")), ConfigError);
  EXPECT_THROW(load_config(dir.file("c.ini", "[method]\nsteps = ten\n")), ConfigError);
  EXPECT_THROW(load_config(dir.file("missing.ini")), ConfigError);
}

TEST(Config, DefaultsFollowModel) {
  RunConfig cfg;
  cfg.model = "lorenz96";
  cfg.steps = 10;
  const auto r = resolve_defaults(cfg);
  EXPECT_EQ(r.scheme, "rk4");
  EXPECT_EQ(r.dt, 0.005);
  EXPECT_EQ(r.n, 40);
  EXPECT_EQ(r.mext, r.m + 2);
  cfg.model = "pendulum";
  EXPECT_THROW(resolve_defaults(cfg), ConfigError);
}

TEST(Sweep, SingleRunHasZeroSpread) {
  RunConfig cfg = small_lorenz63_sweep();
  cfg.ensemble = 1;
  const auto r = run_sweep(cfg);
  ASSERT_EQ(r.records.size(), 3u);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.stddev, 0.0);
    EXPECT_EQ(rec.diverged, 0);
  }
}

TEST(Sweep, RecordStatisticsMatchRows) {
  RunConfig cfg = small_lorenz63_sweep();
  cfg.ensemble = 4;
  const auto r = run_sweep(cfg);
  for (std::size_t p = 0; p < r.records.size(); ++p) {
    std::vector<double> v;
    for (const auto& row : r.rows)
      if (row.grid == r.records[p].grid) v.push_back(row.mean_j);
    ASSERT_EQ(v.size(), 4u);
    double mean = 0.0;
    for (double x : v) mean += x / 4.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(r.records[p].mean, mean, 1e-12 * std::abs(mean));
    EXPECT_NEAR(r.records[p].stddev, std::sqrt(ss / 3.0), 1e-12 * std::abs(mean));
  }
}

TEST(Sweep, DivergedRunsAreExcludedFromStatistics) {
  SweepRecord rec;
  rec.values = {1.0, std::nan(""), 3.0};
  summarize(rec);
  EXPECT_EQ(rec.diverged, 1);
  EXPECT_EQ(rec.mean, 2.0);
  EXPECT_DOUBLE_EQ(rec.stddev, std::sqrt(2.0));
  SweepRecord none;
  none.values = {std::nan("")};
  summarize(none);
  EXPECT_TRUE(std::isnan(none.mean));
}

TEST(Sweep, ParallelEqualsSerialBytewise) {
  RunConfig cfg = small_lorenz63_sweep();
  const std::string serial = rows_csv(run_sweep(cfg));
  cfg.workers = 4;
  const std::string parallel = rows_csv(run_sweep(cfg));
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial, rows_csv(run_sweep(cfg)));
}

TEST(Sweep, SeedsRepeatAcrossGridPoints) {
  const auto r = run_sweep(small_lorenz63_sweep());
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[0].seed, 11u);
  EXPECT_EQ(r.rows[1].seed, 12u);
  EXPECT_EQ(r.rows[2].seed, 11u);
}

TEST(Sweep, BadParameterNameFailsBeforeRunning) {
  RunConfig cfg = small_lorenz63_sweep();
  cfg.grid = parse_grid("gamma:1:2:2");
  EXPECT_THROW(run_sweep(cfg), ParameterError);
}

TEST(Sweep, Lorenz96BelowFirstBifurcationSettlesOnForcing) {
  RunConfig cfg;
  cfg.model = "lorenz96";
  cfg.objective = "mean";
  cfg.steps = 2000;
  cfg.warmup = 20000;
  cfg.grid = parse_grid("F:0.2:0.8:4");
  const auto r = sweep_statistics(cfg);
  for (const auto& rec : r.records) EXPECT_NEAR(rec.mean, rec.grid, 1e-8);
}

TEST(Sweep, SawtoothWaveObjectiveIsFlat) {
  RunConfig cfg;
  cfg.model = "sawtooth";
  cfg.objective = "wave:1,1";
  cfg.steps = 200000;
  cfg.grid = parse_grid("s:-0.6:0.6:3");
  cfg.grid2 = parse_grid("t:-0.6:0.6:3");
  const auto r = sweep_statistics(cfg);
  ASSERT_EQ(r.records.size(), 9u);
  const auto [lo, hi] = std::minmax_element(r.records.begin(), r.records.end(),
                                            [](const auto& a, const auto& b) { return a.mean < b.mean; });
  EXPECT_LT(hi->mean - lo->mean, 1e-2);
}

TEST(Sweep, Lorenz96EnergyCurvesCollapse) {
  std::vector<std::vector<double>> curves;
  for (long n : {10, 20, 40}) {
    RunConfig cfg;
    cfg.model = "lorenz96";
    cfg.n = n;
    cfg.steps = 200000;
    cfg.grid = parse_grid("F:6:10:3");
    std::vector<double> means;
    for (const auto& rec : sweep_statistics(cfg).records) means.push_back(rec.mean);
    curves.push_back(means);
  }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c)
      EXPECT_LT(std::abs(curves[c][i] - curves[2][i]) / curves[2][i], 0.02) << "n index " << c << " F index " << i;
}

TEST(Csv, HeaderQuotingAndNaN) {
  RunRow row;
  row.method = "stats";
  row.model = "sawtooth";
  row.objective = "wave:1,1";
  row.params = "s=0;t=0";
  row.seed = 1;
  row.steps = 10;
  row.mean_j = 0.25;
  row.lambdas = {0.5, -0.5};
  std::ostringstream os;
  write_rows(os, {row});
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "method,model,objective,params,grid,grid2,seed,steps,mean_j,stable,neutral,unstable,total,diverged,"
            "lambda_1,lambda_2");
  EXPECT_NE(text.find("\"wave:1,1\""), std::string::npos);
  EXPECT_NE(text.find(",0.25,nan,"), std::string::npos);
  EXPECT_EQ(summary_path("out/run.csv"), "out/run.summary.csv");
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli({}).code, kExitConfig);
  EXPECT_EQ(cli({"stats"}).code, kExitConfig);
  EXPECT_EQ(cli({"stats", "--model", "lorenz63", "--param", "gamma=2", "--steps", "10"}).code, kExitConfig);
  EXPECT_EQ(cli({"stats", "--model", "lorenz63", "--steps", "0"}).code, kExitConfig);
  EXPECT_EQ(cli({"run", "--model", "lorenz63", "--method", "stats", "--steps", "10"}).code, kExitConfig);
  const auto r = cli({"sweep", "--model", "lorenz63", "--grid", "rho:3:1:2", "--steps", "10"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("grid"), std::string::npos);
}

TEST(Cli, AllRunsDivergedExitsWithThree) {
  const auto r = cli({"stats", "--model", "lorenz96", "--dt", "0.5", "--steps", "1000", "--warmup", "10"});
  EXPECT_EQ(r.code, kExitAllDiverged);
  EXPECT_NE(r.out.find(",nan,nan,nan,nan,nan,1"), std::string::npos);
}

TEST(Cli, Lorenz63ExponentsSumToTrace) {
  const auto r = cli({"les", "--model", "lorenz63", "--mext", "3", "--steps", "1000000", "--spinup", "2000"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto line = r.out.substr(r.out.find('\n') + 1);
  std::vector<std::string> fields;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  ASSERT_GE(fields.size(), 17u);
  double sum = 0.0;
  for (std::size_t i = 14; i < 17; ++i) sum += std::stod(fields[i]);
  const double trace = -(10.0 + 1.0 + 8.0 / 3.0);
  EXPECT_LT(std::abs(sum - trace) / std::abs(trace), 0.01);
}

TEST(Cli, ConfigFileWithFlagOverrides) {
  TempDir dir;
  const auto ini = dir.file("l63.ini",
                            "[model]\nname = lorenz63\nrho = 27\n[method]\nsteps = 500\nwarmup = 100\n"
                            "[sweep]\nseed = 3\n");
  const auto out = dir.file("rows.csv");
  auto r = cli({"stats", "--config", ini, "--steps", "700", "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string text = slurp(out);
  EXPECT_NE(text.find("stats,lorenz63,z,"), std::string::npos);
  EXPECT_NE(text.find("rho=27"), std::string::npos);
  EXPECT_NE(text.find(",3,700,"), std::string::npos);

  r = cli({"stats", "--config", ini, "--steps", "700", "--out", out});
  EXPECT_EQ(slurp(out), text);
}

TEST(Cli, SweepWritesSummaryWithDerivative) {
  TempDir dir;
  const auto out = dir.file("sweep.csv");
  const auto r = cli({"sweep", "--model", "lorenz96", "--n", "8", "--param", "F=0.3", "--objective", "mean", "--grid",
                      "F:0.2:0.8:4", "--steps", "500", "--warmup", "20000", "--fd-degree", "1", "--workers", "2",
                      "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string summary = slurp(summary_path(out));
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "grid,grid2,runs,diverged,mean,std,fd_derivative");
  std::stringstream ss(summary);
  std::string line;
  std::getline(ss, line);
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    EXPECT_NEAR(std::stod(line.substr(line.rfind(',') + 1)), 1.0, 1e-6);
  }
  EXPECT_EQ(rows, 4);
}

TEST(Cli, EmitGradientStream) {
  TempDir dir;
  const auto g = dir.file("g.csv");
  const auto r = cli({"stats", "--model", "sawtooth", "--param", "s=-0.75", "--steps", "300", "--spinup", "100",
                      "--emit-g", g, "--emit-stride", "10"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::stringstream ss(slurp(g));
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "step,x_1,x_2,g_1,g_2");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 20);
}
