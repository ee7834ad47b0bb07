#pragma once

#include <cmath>
#include <vector>

#include "chaos/error.hpp"
#include "chaos/linalg.hpp"
#include "chaos/rng.hpp"
#include "chaos/schur.hpp"
#include "chaos/stepping.hpp"

namespace chaos {

/// Lyapunov exponents (1/time for flows, 1/step for maps), most expansive first.
struct LyapunovEstimate {
  DynVector lambdas;
  long window = 0;  // accumulated steps
  long spinup = 0;  // discarded steps

  double sum() const { return lambdas.sum(); }
  /// Count of exponents above `threshold`.
  int positive(double threshold = 0.0) const {
    return static_cast<int>((lambdas.array() > threshold).count());
  }
};

/// Per-trajectory state of the first-order recursions: the orthonormal basis
/// Q of the leading tangent subspace, the triangular factor R of the last
/// push, the regularized tangent v and its projection coefficients.
template <class Vector>
struct TangentFrame {
  using Basis = BasisOf<Vector>;

  Basis Q;
  Matrix R;
  Matrix R_inv;
  Vector v;
  DynVector c;
  double c0 = 0.0;
  DynVector le_acc;
  long le_count = 0;

  TangentFrame() = default;

  /// Q from orthonormalized standard-Gaussian columns, v = 0.
  TangentFrame(Eigen::Index n, Eigen::Index m, CounterRng& rng)
      : Q(random_orthonormal<Basis>(n, m, rng)), R(Matrix::Identity(m, m)),
        R_inv(Matrix::Identity(m, m)), v(Vector::Zero(n)), c(DynVector::Zero(m)),
        le_acc(DynVector::Zero(m)) {}

  Eigen::Index columns() const { return Q.cols(); }
};

/// Pushes Q through Dφ at the linearization point and re-orthonormalizes:
/// P = Dφ Q, P = Q' R' (positive diagonal). Returns the stage tangents of the
/// old basis columns so second-order contractions at this step can reuse them.
template <class Map, class Vector>
std::vector<typename Map::Tangent> push_basis(TangentFrame<Vector>& frame,
                                              const typename Map::Linearization& lin) {
  const auto m = frame.Q.cols();
  std::vector<typename Map::Tangent> tangents;
  tangents.reserve(static_cast<std::size_t>(m));
  typename TangentFrame<Vector>::Basis p(frame.Q.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    tangents.push_back(lin.tangent(frame.Q.col(j)));
    p.col(j) = tangents.back().image;
  }
  thin_qr(p, frame.Q, frame.R);
  frame.R_inv = upper_inverse(frame.R);
  return tangents;
}

template <class Vector>
void accumulate_les(TangentFrame<Vector>& frame) {
  frame.le_acc.array() += frame.R.diagonal().array().abs().log();
  ++frame.le_count;
}

/// λᵢ = le_accᵢ / (count · Δt).
template <class Vector>
LyapunovEstimate lyapunov_estimate(const TangentFrame<Vector>& frame, double dt, long spinup = 0) {
  if (frame.le_count == 0) throw Error("no Lyapunov samples accumulated");
  LyapunovEstimate out;
  out.lambdas = frame.le_acc / (static_cast<double>(frame.le_count) * dt);
  out.window = frame.le_count;
  out.spinup = spinup;
  return out;
}

/// Full-flow regularization. With r = Dφv + χ, solves the (m+1)-system that
/// makes v' = r − Σ cⁱqⁱ − c⁰f orthogonal to span(Q) and to f, using the
/// Schur complement of the current step. Q must already be the pushed basis.
/// Returns r.
template <class Vector>
Vector regularized_step_full(TangentFrame<Vector>& frame, const Vector& jvp_v, const Vector& chi,
                             const Vector& f_next, const SchurFactor& s) {
  Vector r = jvp_v + chi;
  auto [c, c0] = s.project(frame.Q, f_next, r);
  frame.c = std::move(c);
  frame.c0 = c0;
  frame.v = r - frame.Q * frame.c - c0 * f_next;
  return r;
}

/// Reduced regularization: v' = r − Q Qᵀr with the extended basis.
template <class Vector>
Vector regularized_step_reduced(TangentFrame<Vector>& frame, const Vector& jvp_v, const Vector& chi) {
  Vector r = jvp_v + chi;
  frame.c = frame.Q.transpose() * r;
  frame.v = r - frame.Q * frame.c;
  return r;
}

/// Benettin iteration: Lyapunov exponents of the `m` leading directions along
/// a trajectory of `steps` steps, discarding the first `spinup`.
template <class Map>
LyapunovEstimate lyapunov_spectrum(const Map& map, typename Map::Vector x, Eigen::Index m, long steps,
                                   long spinup, CounterRng& rng) {
  using Vector = typename Map::Vector;
  if (m < 1 || m > map.dim()) throw ConfigError("number of exponents must lie in [1, n]");
  if (steps <= spinup) throw ConfigError("steps must exceed spinup");
  TangentFrame<Vector> frame(map.dim(), m, rng);
  for (long k = 0; k < steps; ++k) {
    if (k >= spinup && k > 0) accumulate_les(frame);
    const auto lin = map.linearize(x);
    push_basis<Map>(frame, lin);
    x = lin.next();
    guard_state(x, k);
  }
  return lyapunov_estimate(frame, map.dt(), spinup);
}

}  // namespace chaos
