#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "chaos/error.hpp"
#include "chaos/linalg.hpp"

namespace chaos {

inline constexpr double kFlowTolerance = 1e-14;
inline constexpr double kSchurTolerance = 1e-12;

/// Schur complement of the (m+1)-system that projects the unstable basis Q
/// and the flow direction f out of a tangent vector:
///   S = I − (Qᵀf)(Qᵀf)ᵀ / (f·f).
/// S has eigenvalue 1 with multiplicity m−1 and 1 − ‖Qᵀf‖²/‖f‖² along Qᵀf,
/// so it is singular exactly when f ∈ span(Q).
struct SchurFactor {
  Matrix S;
  Matrix S_inv;
  DynVector qf;
  double ff = 0.0;

  /// Projection coefficients of r: c solves S c = Qᵀ(r − (f·r/f·f) f) and
  /// c⁰ = f·(r − Qc)/f·f.
  template <class Basis, class Vector>
  std::pair<DynVector, double> project(const Basis& q, const Vector& f, const Vector& r) const {
    const double fr = f.dot(r);
    const DynVector z = q.transpose() * r - (fr / ff) * qf;
    DynVector c = S_inv * z;
    const double c0 = (fr - qf.dot(c)) / ff;
    return {std::move(c), c0};
  }
};

template <class Basis, class Vector>
SchurFactor schur(const Basis& q, const Vector& f) {
  require_dim(static_cast<long>(q.rows()), static_cast<long>(f.size()), "schur basis rows");
  SchurFactor out;
  out.ff = f.squaredNorm();
  if (!(std::sqrt(out.ff) >= kFlowTolerance))
    throw FixedPointError("flow vector vanishes (fixed point); neutral direction undefined");
  out.qf = q.transpose() * f;
  const auto m = q.cols();
  out.S = Matrix::Identity(m, m) - out.qf * out.qf.transpose() / out.ff;
  const double smallest = 1.0 - out.qf.squaredNorm() / out.ff;
  if (!(smallest > kSchurTolerance))
    throw TangencyError("unstable/center tangency: flow vector lies in span(Q), Schur complement singular");
  out.S_inv = out.S.ldlt().solve(Matrix::Identity(m, m));
  return out;
}

}  // namespace chaos
