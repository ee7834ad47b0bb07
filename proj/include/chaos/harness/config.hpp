#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chaos/error.hpp"

namespace chaos::harness {

/// Uniform grid over one model parameter, written `name:start:stop:count`.
struct GridAxis {
  std::string name;
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  std::vector<double> values() const {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
      out[static_cast<std::size_t>(i)] = count == 1 ? start : start + (stop - start) * i / (count - 1);
    return out;
  }

  void validate() const {
    if (name.empty()) throw ConfigError("grid axis needs a parameter name");
    if (count < 1) throw ConfigError("grid count must be >= 1");
    if (count > 1 && !(stop > start)) throw ConfigError("grid must be strictly increasing");
  }
};

inline double parse_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("cannot parse " + what + " from '" + text + "'");
  return value;
}

inline long parse_long(const std::string& text, const std::string& what) {
  long value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("cannot parse " + what + " from '" + text + "'");
  return value;
}

inline GridAxis parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(':', pos);
    parts.push_back(text.substr(pos, next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (parts.size() != 4) throw ConfigError("grid must be name:start:stop:count, got '" + text + "'");
  GridAxis g{parts[0], parse_double(parts[1], "grid start"), parse_double(parts[2], "grid stop"),
             static_cast<int>(parse_long(parts[3], "grid count"))};
  g.validate();
  return g;
}

/// `name=value`.
inline std::pair<std::string, double> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected name=value, got '" + text + "'");
  return {text.substr(0, eq), parse_double(text.substr(eq + 1), "parameter value")};
}

/// Everything one invocation needs. Unset numeric fields (0 or -1) are filled
/// from per-model defaults by `resolve_defaults` in the sweep layer.
struct RunConfig {
  // [model]
  std::string model;
  long n = 0;
  double length = 0.0;
  long nodes = 0;
  std::vector<std::pair<std::string, double>> params;
  // [integrator]
  std::string scheme;
  double dt = 0.0;
  // [method]
  std::string method = "stats";
  std::string objective;
  std::string active;
  long steps = 0;
  long spinup = -1;
  long corr = -1;
  long warmup = -1;
  long m = 0;
  long mext = 0;
  // [sweep]
  std::optional<GridAxis> grid;
  std::optional<GridAxis> grid2;
  int ensemble = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  int fd_degree = 0;
  // [output]
  std::string out;
  std::string emit_g;
  long emit_stride = 1;

  void set_param(const std::string& name, double value) {
    for (auto& [k, v] : params)
      if (k == name) {
        v = value;
        return;
      }
    params.emplace_back(name, value);
  }
};

/// Reads a sectioned key-value file. Keys in [model] other than name, n,
/// length and nodes are model parameters.
inline RunConfig load_config(const std::string& path, RunConfig cfg = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  static const std::vector<std::string> known_sections{"model", "integrator", "method", "sweep", "output"};
  for (const auto& [section, body] : tree) {
    bool known = false;
    for (const auto& s : known_sections) known = known || s == section;
    if (!known) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const std::string value = node.get_value<std::string>();
      const std::string where = section + "." + key;
      if (section == "model") {
        if (key == "name") cfg.model = value;
        else if (key == "n") cfg.n = parse_long(value, where);
        else if (key == "length") cfg.length = parse_double(value, where);
        else if (key == "nodes") cfg.nodes = parse_long(value, where);
        else cfg.set_param(key, parse_double(value, where));
      } else if (section == "integrator") {
        if (key == "scheme") cfg.scheme = value;
        else if (key == "dt") cfg.dt = parse_double(value, where);
        else throw ConfigError("config: unknown key " + where);
      } else if (section == "method") {
        if (key == "method") cfg.method = value;
        else if (key == "objective") cfg.objective = value;
        else if (key == "active") cfg.active = value;
        else if (key == "steps") cfg.steps = parse_long(value, where);
        else if (key == "spinup") cfg.spinup = parse_long(value, where);
        else if (key == "corr") cfg.corr = parse_long(value, where);
        else if (key == "warmup") cfg.warmup = parse_long(value, where);
        else if (key == "m") cfg.m = parse_long(value, where);
        else if (key == "mext") cfg.mext = parse_long(value, where);
        else throw ConfigError("config: unknown key " + where);
      } else if (section == "sweep") {
        if (key == "grid") cfg.grid = parse_grid(value);
        else if (key == "grid2") cfg.grid2 = parse_grid(value);
        else if (key == "ensemble") cfg.ensemble = static_cast<int>(parse_long(value, where));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value, where));
        else if (key == "workers") cfg.workers = static_cast<int>(parse_long(value, where));
        else if (key == "fd_degree") cfg.fd_degree = static_cast<int>(parse_long(value, where));
        else throw ConfigError("config: unknown key " + where);
      } else {
        if (key == "out") cfg.out = value;
        else if (key == "emit_g") cfg.emit_g = value;
        else if (key == "emit_stride") cfg.emit_stride = parse_long(value, where);
        else throw ConfigError("config: unknown key " + where);
      }
    }
  }
  return cfg;
}

}  // namespace chaos::harness
