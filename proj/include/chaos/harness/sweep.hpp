#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "chaos/harness/config.hpp"
#include "chaos/models.hpp"
#include "chaos/objective.hpp"
#include "chaos/response.hpp"
#include "chaos/srb.hpp"
#include "chaos/stepping.hpp"
#include "chaos/tangent.hpp"

namespace chaos::harness {

enum class Method { stats, full, reduced, les };

inline Method parse_method(const std::string& s) {
  if (s == "stats") return Method::stats;
  if (s == "full") return Method::full;
  if (s == "reduced") return Method::reduced;
  if (s == "les") return Method::les;
  throw ConfigError("unknown method '" + s + "' (expected stats, full, reduced or les)");
}

/// Fills every unset field with the model's benchmark default. The unstable
/// dimensions below come from Lyapunov runs at the default parameters
/// (lorenz96 n=40, F=8 has 13 positive exponents).
inline RunConfig resolve_defaults(RunConfig cfg) {
  if (cfg.model.empty()) throw ConfigError("no model given (--model)");
  auto fill = [](auto& field, auto unset, auto value) {
    if (field == unset) field = value;
  };
  if (cfg.model == "lorenz63") {
    fill(cfg.scheme, std::string{}, std::string("rk2"));
    fill(cfg.dt, 0.0, 0.005);
    fill(cfg.active, std::string{}, std::string("rho"));
    fill(cfg.objective, std::string{}, std::string("z"));
    fill(cfg.spinup, -1L, 20000L);
    fill(cfg.corr, -1L, 10000L);
    fill(cfg.warmup, -1L, 2000L);
    fill(cfg.m, 0L, 1L);
  } else if (cfg.model == "lorenz96") {
    fill(cfg.n, 0L, 40L);
    fill(cfg.scheme, std::string{}, std::string("rk4"));
    fill(cfg.dt, 0.0, 0.005);
    fill(cfg.active, std::string{}, std::string("F"));
    fill(cfg.objective, std::string{}, std::string("energy"));
    fill(cfg.spinup, -1L, 2000L);
    fill(cfg.corr, -1L, 10000L);
    fill(cfg.warmup, -1L, 2000L);
    fill(cfg.m, 0L, 13L);
  } else if (cfg.model == "sawtooth") {
    fill(cfg.n, 0L, 2L);
    fill(cfg.scheme, std::string{}, std::string("discrete"));
    fill(cfg.dt, 0.0, 1.0);
    fill(cfg.active, std::string{}, std::string("s"));
    fill(cfg.objective, std::string{}, std::string("wave:1,1"));
    fill(cfg.spinup, -1L, 100L);
    fill(cfg.corr, -1L, 1L);
    fill(cfg.warmup, -1L, 100L);
    fill(cfg.m, 0L, cfg.n);
  } else if (cfg.model == "ks") {
    fill(cfg.length, 0.0, 128.0);
    fill(cfg.nodes, 0L, 513L);
    fill(cfg.scheme, std::string{}, std::string("rk4"));
    fill(cfg.dt, 0.0, 0.0006);
    fill(cfg.active, std::string{}, std::string("c"));
    fill(cfg.objective, std::string{}, std::string("mean"));
    // 300 TU: the flow direction enters span(Q) only at the rate of the
    // first projected-out exponent, about 0.026 at c = 0.5.
    fill(cfg.spinup, -1L, 500000L);
    fill(cfg.corr, -1L, 1L);
    fill(cfg.warmup, -1L, 83333L);
    // Six expanding directions besides the neutral one on L = 64; chaos is
    // extensive, so the count is scaled with the domain length.
    fill(cfg.m, 0L, std::max(1L, std::lround(6.0 * cfg.length / 64.0)));
  } else {
    throw ConfigError("unknown model '" + cfg.model + "' (expected lorenz63, lorenz96, sawtooth or ks)");
  }
  fill(cfg.mext, 0L, cfg.m + 2);
  (void)parse_method(cfg.method);
  (void)parse_scheme(cfg.scheme);
  (void)Objective::parse(cfg.objective);
  if (cfg.steps <= 0) throw ConfigError("steps must be positive (--steps)");
  if (cfg.ensemble < 1) throw ConfigError("ensemble size must be >= 1");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.emit_stride < 1) throw ConfigError("emit_stride must be >= 1");
  if (cfg.grid) cfg.grid->validate();
  if (cfg.grid2) cfg.grid2->validate();
  return cfg;
}

/// Builds the one-step map named by `cfg` (with parameter overrides applied)
/// and calls `fn(map)`.
template <class Fn>
decltype(auto) with_step_map(const RunConfig& cfg, Fn&& fn) {
  const Scheme scheme = parse_scheme(cfg.scheme);
  auto finish = [&](auto model) -> decltype(auto) {
    for (const auto& [name, value] : cfg.params) model.set_param(name, value);
    StepMap map(std::move(model), scheme, cfg.dt, cfg.active);
    return fn(static_cast<const decltype(map)&>(map));
  };
  if (cfg.model == "lorenz63") return finish(Lorenz63{});
  if (cfg.model == "lorenz96") return finish(Lorenz96(cfg.n));
  if (cfg.model == "sawtooth") return finish(Sawtooth(cfg.n));
  if (cfg.model == "ks") return finish(KuramotoSivashinsky(cfg.length, cfg.nodes));
  throw ConfigError("unknown model '" + cfg.model + "'");
}

/// One trajectory's result. Quantities the method does not produce are NaN.
struct RunRow {
  std::string method;
  std::string model;
  std::string objective;
  std::string params;
  double grid = std::nan("");
  double grid2 = std::nan("");
  std::uint64_t seed = 0;
  long steps = 0;
  double mean_j = std::nan("");
  double stable = std::nan("");
  double neutral = std::nan("");
  double unstable = std::nan("");
  double total = std::nan("");
  bool diverged = false;
  std::vector<double> lambdas;
  std::string reason;
};

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class Model>
std::string describe_params(const Model& model) {
  std::string out;
  const auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ';';
    out += std::string(p.name(i)) + "=" + format_real(p[i]);
  }
  return out;
}

/// Runs one (grid point, seed) job. Divergence is recorded in the row; only
/// configuration errors escape.
inline RunRow run_job(const RunConfig& cfg, std::uint64_t seed) {
  RunRow row;
  row.method = cfg.method;
  row.model = cfg.model;
  row.objective = cfg.objective;
  row.seed = seed;
  row.steps = cfg.steps;
  const Method method = parse_method(cfg.method);
  const Objective objective = Objective::parse(cfg.objective);
  with_step_map(cfg, [&](const auto& map) {
    using Map = std::decay_t<decltype(map)>;
    row.params = describe_params(map.model());
    CounterRng rng(seed);
    auto take = [&](const SensitivityBreakdown& b) {
      row.diverged = b.diverged;
      row.reason = b.reason;
      row.stable = b.stable;
      row.neutral = b.neutral;
      row.unstable = b.unstable;
      row.total = b.total;
      row.mean_j = b.diverged ? std::nan("") : b.mean_objective;
      row.lambdas.assign(b.les.lambdas.data(), b.les.lambdas.data() + b.les.lambdas.size());
    };
    try {
      switch (method) {
        case Method::stats:
          row.mean_j = time_average(map, objective, cfg.steps, cfg.warmup, rng);
          break;
        case Method::full:
          if constexpr (Map::is_discrete()) {
            throw ConfigError("full S3 needs a flow model");
          } else {
            FullS3Options o{cfg.m, cfg.steps, cfg.spinup, cfg.corr};
            take(run_full_s3(map, objective, o, cfg.warmup, rng));
          }
          break;
        case Method::reduced: {
          ReducedS3Options o{cfg.mext, cfg.steps, cfg.spinup};
          take(run_reduced_s3(map, objective, o, cfg.warmup, rng));
          break;
        }
        case Method::les: {
          auto x0 = warm_up(map, map.model().initial_state(rng), cfg.warmup);
          const auto le = lyapunov_spectrum(map, x0, cfg.mext, cfg.steps, cfg.spinup, rng);
          row.lambdas.assign(le.lambdas.data(), le.lambdas.data() + le.lambdas.size());
          break;
        }
      }
    } catch (const DivergenceError& e) {
      row.diverged = true;
      row.reason = e.what();
    } catch (const DegenerateTangentError& e) {
      row.diverged = true;
      row.reason = e.what();
    }
    if (method == Method::stats && !std::isfinite(row.mean_j)) row.diverged = true;
  });
  return row;
}

/// Mean and standard deviation over the non-diverged runs of one grid point.
struct SweepRecord {
  double grid = std::nan("");
  double grid2 = std::nan("");
  std::vector<double> values;  // per-run value, NaN when diverged
  double mean = std::nan("");
  double stddev = std::nan("");
  int diverged = 0;
  double fd_derivative = std::nan("");
};

/// The per-run quantity a sweep summarizes: ⟨J⟩ for stats, the total
/// sensitivity for full and reduced, λ₁ for les.
inline double summary_value(const RunRow& row, Method method) {
  if (row.diverged) return std::nan("");
  switch (method) {
    case Method::stats: return row.mean_j;
    case Method::full:
    case Method::reduced: return row.total;
    case Method::les: return row.lambdas.empty() ? std::nan("") : row.lambdas.front();
  }
  return std::nan("");
}

/// σ is the sample standard deviation (R−1 denominator); 0 for a single run.
inline void summarize(SweepRecord& rec) {
  double sum = 0.0;
  int count = 0;
  for (double v : rec.values)
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  rec.diverged = static_cast<int>(rec.values.size()) - count;
  if (count == 0) return;
  rec.mean = sum / count;
  double ss = 0.0;
  for (double v : rec.values)
    if (std::isfinite(v)) ss += (v - rec.mean) * (v - rec.mean);
  rec.stddev = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
}

struct SweepResult {
  std::vector<RunRow> rows;        // sorted by (grid, grid2, seed)
  std::vector<SweepRecord> records;
};

/// Runs grid × grid2 × ensemble jobs on `cfg.workers` threads. Seeds are
/// seed_base + ensemble index, identical at every grid point. Each job
/// writes its own slot, so the output is independent of scheduling.
inline SweepResult run_sweep(const RunConfig& cfg_in) {
  const RunConfig cfg = resolve_defaults(cfg_in);
  const Method method = parse_method(cfg.method);
  const std::vector<double> g1 = cfg.grid ? cfg.grid->values() : std::vector<double>{std::nan("")};
  const std::vector<double> g2 = cfg.grid2 ? cfg.grid2->values() : std::vector<double>{std::nan("")};
  const std::size_t reps = static_cast<std::size_t>(cfg.ensemble);
  const std::size_t jobs = g1.size() * g2.size() * reps;

  auto job_config = [&](std::size_t point) {
    RunConfig c = cfg;
    if (cfg.grid) c.set_param(cfg.grid->name, g1[point / g2.size()]);
    if (cfg.grid2) c.set_param(cfg.grid2->name, g2[point % g2.size()]);
    return c;
  };
  // Fail on bad parameter names before any thread starts.
  with_step_map(job_config(0), [](const auto&) { return 0; });

  SweepResult result;
  result.rows.resize(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    while (!failed) {
      const std::size_t j = next++;
      if (j >= jobs) return;
      try {
        const std::size_t point = j / reps;
        RunRow row = run_job(job_config(point), cfg.seed + j % reps);
        row.grid = g1[point / g2.size()];
        row.grid2 = g2[point % g2.size()];
        result.rows[j] = std::move(row);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(cfg.workers, static_cast<int>(jobs)));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t point = 0; point < g1.size() * g2.size(); ++point) {
    SweepRecord rec;
    rec.grid = g1[point / g2.size()];
    rec.grid2 = g2[point % g2.size()];
    for (std::size_t r = 0; r < reps; ++r) rec.values.push_back(summary_value(result.rows[point * reps + r], method));
    summarize(rec);
    result.records.push_back(std::move(rec));
  }
  return result;
}

/// Long-time averages ⟨J⟩ over the grid.
inline SweepResult sweep_statistics(RunConfig cfg) {
  if (parse_method(cfg.method) != Method::stats) throw ConfigError("sweep_statistics requires method = stats");
  return run_sweep(cfg);
}

/// Ensembles of sensitivity runs over the grid.
inline SweepResult run_ensemble(RunConfig cfg) {
  const Method m = parse_method(cfg.method);
  if (m != Method::full && m != Method::reduced) throw ConfigError("run_ensemble requires method full or reduced");
  return run_sweep(cfg);
}

}  // namespace chaos::harness
