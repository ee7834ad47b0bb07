#pragma once

#include <algorithm>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "chaos/error.hpp"
#include "chaos/harness/sweep.hpp"

namespace chaos::harness {

/// Quotes text fields that contain a separator or a quote.
inline std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Per-run table: one header line, reals at 17 significant digits, NaN for
/// quantities the method does not produce. lambda_i columns are padded to
/// the longest spectrum in the table.
inline void write_rows(std::ostream& os, const std::vector<RunRow>& rows) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.lambdas.size());
  os << "method,model,objective,params,grid,grid2,seed,steps,mean_j,stable,neutral,unstable,total,diverged";
  for (std::size_t i = 1; i <= width; ++i) os << ",lambda_" << i;
  os << '\n';
  for (const auto& r : rows) {
    os << csv_field(r.method) << ',' << csv_field(r.model) << ',' << csv_field(r.objective) << ','
       << csv_field(r.params) << ',' << format_real(r.grid) << ','
       << format_real(r.grid2) << ',' << r.seed << ',' << r.steps << ',' << format_real(r.mean_j) << ','
       << format_real(r.stable) << ',' << format_real(r.neutral) << ',' << format_real(r.unstable) << ','
       << format_real(r.total) << ',' << (r.diverged ? 1 : 0);
    for (std::size_t i = 0; i < width; ++i)
      os << ',' << format_real(i < r.lambdas.size() ? r.lambdas[i] : std::nan(""));
    os << '\n';
  }
}

/// Per-grid-point table: mean and σ of the summarized value over
/// non-diverged runs.
inline void write_summary(std::ostream& os, const std::vector<SweepRecord>& records) {
  os << "grid,grid2,runs,diverged,mean,std,fd_derivative\n";
  for (const auto& r : records)
    os << format_real(r.grid) << ',' << format_real(r.grid2) << ',' << r.values.size() << ',' << r.diverged << ','
       << format_real(r.mean) << ',' << format_real(r.stddev) << ',' << format_real(r.fd_derivative) << '\n';
}

/// `out.csv` → `out.summary.csv`.
inline std::string summary_path(const std::string& out) {
  const auto dot = out.rfind(".csv");
  return (dot != std::string::npos && dot + 4 == out.size() ? out.substr(0, dot) : out) + ".summary.csv";
}

template <class Writer>
void write_file(const std::string& path, Writer&& writer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  writer(os);
  if (!os) throw Error("write to '" + path + "' failed");
}

}  // namespace chaos::harness
