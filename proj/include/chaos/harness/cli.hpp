#pragma once

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "chaos/harness/config.hpp"
#include "chaos/harness/csv.hpp"
#include "chaos/harness/fd_reference.hpp"
#include "chaos/harness/sweep.hpp"

namespace chaos::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAllDiverged = 3;

namespace detail {

/// Raw flag values; only flags actually given override the config file.
struct Flags {
  std::string config, model, scheme, method, objective, active, out, emit_g, grid, grid2;
  std::vector<std::string> params;
  long n = 0, nodes = 0, steps = 0, spinup = 0, corr = 0, warmup = 0, m = 0, mext = 0, emit_stride = 1;
  double length = 0.0, dt = 0.0;
  int ensemble = 1, workers = 1, fd_degree = 0;
  std::uint64_t seed = 1;
};

struct BoundOptions {
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  CLI::Option* config = nullptr;
};

inline BoundOptions bind_options(CLI::App& sub, Flags& f, bool sweep) {
  BoundOptions b;
  auto add = [&](const std::string& name, auto& field, const std::string& help, auto apply) {
    CLI::Option* opt = sub.add_option(name, field, help);
    b.overrides.emplace_back(opt, [&field, apply](RunConfig& c) { apply(c, field); });
  };
  b.config = sub.add_option("--config", f.config, "sectioned key-value config file");
  add("--model", f.model, "lorenz63 | lorenz96 | sawtooth | ks", [](RunConfig& c, auto& v) { c.model = v; });
  add("--param", f.params, "model parameter override name=value (repeatable)", [](RunConfig& c, auto& v) {
    for (const auto& a : v) {
      const auto [k, x] = parse_assignment(a);
      c.set_param(k, x);
    }
  });
  add("--n", f.n, "state dimension (lorenz96, sawtooth)", [](RunConfig& c, auto& v) { c.n = v; });
  add("--length", f.length, "domain length (ks)", [](RunConfig& c, auto& v) { c.length = v; });
  add("--nodes", f.nodes, "grid nodes including boundaries (ks)", [](RunConfig& c, auto& v) { c.nodes = v; });
  add("--scheme", f.scheme, "rk2 | rk4 | discrete", [](RunConfig& c, auto& v) { c.scheme = v; });
  add("--dt", f.dt, "time step", [](RunConfig& c, auto& v) { c.dt = v; });
  add("--method", f.method, "stats | full | reduced | les", [](RunConfig& c, auto& v) { c.method = v; });
  add("--objective", f.objective, "mean | energy | x | y | z | moment:p | component:i | exp:i | wave:w1,w2,...",
      [](RunConfig& c, auto& v) { c.objective = v; });
  add("--active", f.active, "parameter to differentiate", [](RunConfig& c, auto& v) { c.active = v; });
  add("--steps", f.steps, "N, total iterations", [](RunConfig& c, auto& v) { c.steps = v; });
  add("--spinup", f.spinup, "T, iterations discarded before averaging", [](RunConfig& c, auto& v) { c.spinup = v; });
  add("--corr", f.corr, "K, correlation truncation length", [](RunConfig& c, auto& v) { c.corr = v; });
  add("--warmup", f.warmup, "primal steps before the recursions start", [](RunConfig& c, auto& v) { c.warmup = v; });
  add("--m", f.m, "unstable dimension", [](RunConfig& c, auto& v) { c.m = v; });
  add("--mext", f.mext, "projected directions (reduced) or exponents (les)", [](RunConfig& c, auto& v) { c.mext = v; });
  add("--seed", f.seed, "seed base", [](RunConfig& c, auto& v) { c.seed = v; });
  add("--ensemble", f.ensemble, "runs per grid point", [](RunConfig& c, auto& v) { c.ensemble = v; });
  add("--workers", f.workers, "worker threads", [](RunConfig& c, auto& v) { c.workers = v; });
  add("--out", f.out, "CSV output path (stdout when absent)", [](RunConfig& c, auto& v) { c.out = v; });
  if (sweep) {
    add("--grid", f.grid, "name:start:stop:count", [](RunConfig& c, auto& v) { c.grid = parse_grid(v); });
    add("--grid2", f.grid2, "second axis name:start:stop:count", [](RunConfig& c, auto& v) { c.grid2 = parse_grid(v); });
    add("--fd-degree", f.fd_degree, "polynomial degree of the FD reference column (stats)",
        [](RunConfig& c, auto& v) { c.fd_degree = v; });
  } else {
    add("--emit-g", f.emit_g, "stream (step, x, g) rows to this CSV (stats)", [](RunConfig& c, auto& v) { c.emit_g = v; });
    add("--emit-stride", f.emit_stride, "emit every k-th step", [](RunConfig& c, auto& v) { c.emit_stride = v; });
  }
  return b;
}

inline RunConfig assemble(const BoundOptions& b, const Flags& f) {
  RunConfig cfg;
  if (b.config->count()) cfg = load_config(f.config);
  for (const auto& [opt, apply] : b.overrides)
    if (opt->count()) apply(cfg);
  return cfg;
}

/// Streams (step, x¹…xⁿ, g¹…gᵐ) along one trajectory.
inline void emit_density_gradient(const RunConfig& cfg, std::ostream& os) {
  with_step_map(cfg, [&](const auto& map) {
    using Vector = typename std::decay_t<decltype(map)>::Vector;
    CounterRng rng(cfg.seed);
    auto x0 = warm_up(map, map.model().initial_state(rng), cfg.warmup);
    os << "step";
    for (Eigen::Index i = 1; i <= map.dim(); ++i) os << ",x_" << i;
    for (long i = 1; i <= cfg.m; ++i) os << ",g_" << i;
    os << '\n';
    auto sink = [&](long k, const Vector& x, const DynVector& g) {
      if (k % cfg.emit_stride) return;
      os << k;
      for (Eigen::Index i = 0; i < x.size(); ++i) os << ',' << format_real(x[i]);
      for (Eigen::Index i = 0; i < g.size(); ++i) os << ',' << format_real(g[i]);
      os << '\n';
    };
    run_density_gradient(map, x0, cfg.m, cfg.steps, cfg.spinup, rng, sink);
    return 0;
  });
}

inline void print_summary(std::ostream& os, const std::string& command, const RunConfig& cfg,
                          const SweepResult& result) {
  std::size_t diverged = 0;
  for (const auto& r : result.rows) diverged += r.diverged ? 1 : 0;
  os << command << ' ' << cfg.model << ' ' << cfg.method << ": " << result.rows.size() << " run(s), " << diverged
     << " diverged";
  if (result.records.size() == 1 && !result.rows.empty()) {
    const auto& r = result.rows.front();
    const Method method = parse_method(cfg.method);
    if (method == Method::les) {
      double sum = 0.0;
      os << ", lambdas";
      for (double l : r.lambdas) {
        os << ' ' << format_real(l);
        sum += l;
      }
      os << ", sum " << format_real(sum);
    } else if (method == Method::stats) {
      os << ", mean " << format_real(result.records.front().mean);
    } else {
      os << ", total " << format_real(result.records.front().mean) << " (first run: stable " << format_real(r.stable)
         << ", neutral " << format_real(r.neutral) << ", unstable " << format_real(r.unstable) << ")";
    }
  }
  os << '\n';
}

}  // namespace detail

/// Entry point of the `chaos-response` tool. Returns 0 on success, 2 on a
/// configuration or usage error, 3 when every run diverged.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Linear response of chaotic systems by the space-split sensitivity method", "chaos-response"};
  app.require_subcommand(1);
  detail::Flags f_run, f_sweep, f_stats, f_les;
  CLI::App* run = app.add_subcommand("run", "one sensitivity computation (method full or reduced)");
  CLI::App* sweep = app.add_subcommand("sweep", "parameter grid x ensemble of any method");
  CLI::App* stats = app.add_subcommand("stats", "long-time average of the objective");
  CLI::App* les = app.add_subcommand("les", "Lyapunov exponents");
  const auto b_run = detail::bind_options(*run, f_run, false);
  const auto b_sweep = detail::bind_options(*sweep, f_sweep, true);
  const auto b_stats = detail::bind_options(*stats, f_stats, false);
  const auto b_les = detail::bind_options(*les, f_les, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitConfig;
  }

  std::string command;
  try {
    RunConfig cfg;
    if (run->parsed()) {
      command = "run";
      cfg = detail::assemble(b_run, f_run);
      // Without an explicit method: full S3 where it is affordable, reduced otherwise.
      if (cfg.method == "stats") cfg.method = cfg.model == "lorenz63" ? "full" : "reduced";
      if (cfg.method != "full" && cfg.method != "reduced") throw ConfigError("run requires --method full or reduced");
    } else if (sweep->parsed()) {
      command = "sweep";
      cfg = detail::assemble(b_sweep, f_sweep);
    } else if (stats->parsed()) {
      command = "stats";
      cfg = detail::assemble(b_stats, f_stats);
      cfg.method = "stats";
    } else {
      command = "les";
      cfg = detail::assemble(b_les, f_les);
      cfg.method = "les";
    }
    if (command != "sweep") {
      cfg.grid.reset();
      cfg.grid2.reset();
    }
    cfg = resolve_defaults(cfg);

    SweepResult result = run_sweep(cfg);
    if (cfg.fd_degree > 0 && cfg.grid && parse_method(cfg.method) == Method::stats) {
      try {
        const auto at = cfg.grid->values();
        const auto d = fd_reference(result.records, cfg.fd_degree, at, at.front(), at.back());
        for (std::size_t i = 0; i < result.records.size(); ++i) result.records[i].fd_derivative = d[i];
      } catch (const FitError& e) {
        err << "warning: " << e.what() << '\n';
      }
    }
    if (cfg.out.empty()) {
      write_rows(out, result.rows);
    } else {
      write_file(cfg.out, [&](std::ostream& os) { write_rows(os, result.rows); });
      if (command == "sweep")
        write_file(summary_path(cfg.out), [&](std::ostream& os) { write_summary(os, result.records); });
    }
    if (!cfg.emit_g.empty()) {
      if (command != "stats") throw ConfigError("--emit-g is only available with stats");
      write_file(cfg.emit_g, [&](std::ostream& os) { detail::emit_density_gradient(cfg, os); });
    }
    detail::print_summary(cfg.out.empty() ? err : out, command, cfg, result);

    bool all_diverged = !result.rows.empty();
    for (const auto& r : result.rows) all_diverged = all_diverged && r.diverged;
    return all_diverged ? kExitAllDiverged : kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const FitError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  if (!command.empty()) {
    CLI::App* sub = app.get_subcommand(command);
    err << sub->help();
  }
  return kExitConfig;
}

}  // namespace chaos::harness
