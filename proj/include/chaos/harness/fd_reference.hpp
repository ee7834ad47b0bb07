#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "chaos/error.hpp"
#include "chaos/harness/sweep.hpp"
#include "chaos/linalg.hpp"

namespace chaos::harness {

/// Fits with a scaled Vandermonde condition number above this are rejected.
inline constexpr double kFitConditionLimit = 1e10;

/// Least-squares polynomial in the scaled variable t = (x − center)/scale,
/// t ∈ [−1, 1] over the fit window.
struct PolynomialFit {
  DynVector coeffs;  // ascending powers of t
  double center = 0.0;
  double scale = 1.0;
  double condition = 0.0;

  double operator()(double x) const {
    const double t = (x - center) / scale;
    double acc = 0.0;
    for (Eigen::Index i = coeffs.size(); i-- > 0;) acc = acc * t + coeffs[i];
    return acc;
  }
};

/// Points outside [lo, hi] and non-finite values are ignored.
inline PolynomialFit fit_polynomial(const std::vector<double>& xs, const std::vector<double>& ys, int degree,
                                    double lo, double hi) {
  if (xs.size() != ys.size()) throw DimensionError("fit: x and y lengths differ");
  if (degree < 0) throw FitError("fit: negative degree");
  if (!(hi > lo)) throw FitError("fit: empty window");
  std::vector<double> wx, wy;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] >= lo && xs[i] <= hi && std::isfinite(ys[i])) {
      wx.push_back(xs[i]);
      wy.push_back(ys[i]);
    }
  const auto rows = static_cast<Eigen::Index>(wx.size());
  if (rows < degree + 1)
    throw FitError("fit: " + std::to_string(rows) + " points in window, degree " + std::to_string(degree) +
                   " needs at least " + std::to_string(degree + 1));
  PolynomialFit fit;
  fit.center = 0.5 * (lo + hi);
  fit.scale = 0.5 * (hi - lo);
  Matrix a(rows, degree + 1);
  DynVector b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double t = (wx[static_cast<std::size_t>(r)] - fit.center) / fit.scale;
    double p = 1.0;
    for (int c = 0; c <= degree; ++c, p *= t) a(r, c) = p;
    b[r] = wy[static_cast<std::size_t>(r)];
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  fit.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  if (!(fit.condition < kFitConditionLimit))
    throw FitError("fit: ill-conditioned (condition number " + std::to_string(fit.condition) + ", degree " +
                   std::to_string(degree) + ")");
  fit.coeffs = svd.solve(b);
  return fit;
}

/// Central difference of the fitted polynomial, step `rel_step`·scale.
inline double central_difference(const PolynomialFit& fit, double x, double rel_step = 1e-4) {
  const double h = rel_step * fit.scale;
  return (fit(x + h) - fit(x - h)) / (2.0 * h);
}

/// d⟨J⟩/ds at each `at` from a degree-`degree` fit of the table over [lo, hi].
inline std::vector<double> fd_reference(const std::vector<double>& xs, const std::vector<double>& ys, int degree,
                                        const std::vector<double>& at, double lo, double hi) {
  const PolynomialFit fit = fit_polynomial(xs, ys, degree, lo, hi);
  std::vector<double> out;
  out.reserve(at.size());
  for (double x : at) out.push_back(central_difference(fit, x));
  return out;
}

/// Same, from the per-point means of a statistics sweep.
inline std::vector<double> fd_reference(const std::vector<SweepRecord>& table, int degree,
                                        const std::vector<double>& at, double lo, double hi) {
  std::vector<double> xs, ys;
  for (const auto& r : table) {
    xs.push_back(r.grid);
    ys.push_back(r.mean);
  }
  return fd_reference(xs, ys, degree, at, lo, hi);
}

}  // namespace chaos::harness
