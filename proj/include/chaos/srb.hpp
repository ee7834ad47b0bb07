#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "chaos/linalg.hpp"
#include "chaos/tangent.hpp"

namespace chaos {

/// Second-order tangent state of the unstable basis.
///
///  a^{i,j}       second-order tangents (curvature of the unstable manifold),
///                symmetric, stored for j ≤ i only
///  dR[i](p,q)    (∂_{ξⁱ} R)^{pq}, upper triangular
///  g[i]          SRB density gradient along qⁱ (log-density slope)
///  p^{i,j}       ∂_{ξʲ} qⁱ, derivatives of the basis vectors
///
/// Memory is O(m² n); per step the dominant work is m(m+1)/2 second-order
/// contractions of φ plus an O(n m³) rescaling by R⁻¹.
template <class Vector>
struct SecondOrderFrame {
  Eigen::Index m = 0;
  std::vector<Vector> a;  // packed lower triangle, index i(i+1)/2 + j
  std::vector<Matrix> dR;
  DynVector g;
  std::vector<Vector> p;  // row-major m×m, index i*m + j

  SecondOrderFrame() = default;
  SecondOrderFrame(Eigen::Index n, Eigen::Index m_)
      : m(m_), a(static_cast<std::size_t>(m_ * (m_ + 1) / 2), Vector::Zero(n)),
        dR(static_cast<std::size_t>(m_), Matrix::Zero(m_, m_)), g(DynVector::Zero(m_)),
        p(static_cast<std::size_t>(m_ * m_), Vector::Zero(n)) {}

  static std::size_t packed(Eigen::Index i, Eigen::Index j) {
    if (j > i) std::swap(i, j);
    return static_cast<std::size_t>(i * (i + 1) / 2 + j);
  }
  Vector& a_at(Eigen::Index i, Eigen::Index j) { return a[packed(i, j)]; }
  const Vector& a_at(Eigen::Index i, Eigen::Index j) const { return a[packed(i, j)]; }
  Vector& p_at(Eigen::Index i, Eigen::Index j) { return p[static_cast<std::size_t>(i * m + j)]; }
  const Vector& p_at(Eigen::Index i, Eigen::Index j) const { return p[static_cast<std::size_t>(i * m + j)]; }
};

/// ã^{i,j} = D²φ(qⁱ, qʲ) + Dφ a^{i,j} at the old basis, then the double
/// rescaling a^{i,j} ← Σ_{p,q} ã^{p,q} (R⁻¹)^{pi} (R⁻¹)^{qj}.
/// `tangents` are the stage tangents of the old basis columns returned by
/// push_basis; `r_inv` is the inverse of the freshly computed R.
template <class Map, class Vector>
void push_second_order(SecondOrderFrame<Vector>& frame, const typename Map::Linearization& lin,
                       const std::vector<typename Map::Tangent>& tangents, const Matrix& r_inv) {
  const Eigen::Index m = frame.m;
  std::vector<Vector> tilde(frame.a.size());
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto idx = SecondOrderFrame<Vector>::packed(i, j);
      tilde[idx] = lin.hvp(tangents[static_cast<std::size_t>(i)], tangents[static_cast<std::size_t>(j)]) +
                   lin.jvp(frame.a[idx]);
    }
  // half[p*m + j] = Σ_q ã^{p,q} (R⁻¹)^{qj}; R⁻¹ is upper triangular so q ≤ j.
  const auto n = lin.base().size();
  std::vector<Vector> half(static_cast<std::size_t>(m * m), Vector::Zero(n));
  for (Eigen::Index pi = 0; pi < m; ++pi)
    for (Eigen::Index j = 0; j < m; ++j) {
      Vector& h = half[static_cast<std::size_t>(pi * m + j)];
      for (Eigen::Index q = 0; q <= j; ++q) h += r_inv(q, j) * tilde[SecondOrderFrame<Vector>::packed(pi, q)];
    }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      Vector& out = frame.a_at(i, j);
      out.setZero();
      for (Eigen::Index pi = 0; pi <= i; ++pi) out += r_inv(pi, i) * half[static_cast<std::size_t>(pi * m + j)];
    }
}

/// Assembles ∂_{ξⁱ}R by the three-case rule and gⁱ = −tr(∂_{ξⁱ}R):
///   (∂_{ξⁱ}R)^{pq} = q^p·a^{p,i}                  if p = q
///                  = q^p·a^{q,i} + q^q·a^{p,i}      if p < q
///                  = 0                              otherwise
template <class Vector, class Basis>
void compute_dR_and_g(SecondOrderFrame<Vector>& frame, const Basis& q) {
  const Eigen::Index m = frame.m;
  for (Eigen::Index i = 0; i < m; ++i) {
    Matrix& d = frame.dR[static_cast<std::size_t>(i)];
    d.setZero();
    for (Eigen::Index pi = 0; pi < m; ++pi) {
      d(pi, pi) = q.col(pi).dot(frame.a_at(pi, i));
      for (Eigen::Index qi = pi + 1; qi < m; ++qi)
        d(pi, qi) = q.col(pi).dot(frame.a_at(qi, i)) + q.col(qi).dot(frame.a_at(pi, i));
    }
    frame.g[i] = -d.trace();
  }
}

/// p^{i,j} = a^{i,j} − Σ_l q^l (∂_{ξʲ}R)^{l,i}.
template <class Vector, class Basis>
void basis_derivatives(SecondOrderFrame<Vector>& frame, const Basis& q) {
  const Eigen::Index m = frame.m;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const Matrix& d = frame.dR[static_cast<std::size_t>(j)];
      Vector& out = frame.p_at(i, j);
      out = frame.a_at(i, j);
      for (Eigen::Index l = 0; l <= i; ++l)
        if (d(l, i) != 0.0) out -= d(l, i) * q.col(l);
    }
}

/// Running L²(μ) norms of the components of g, (Σ (gⁱ)² / N)^{1/2}.
class GNormAccumulator {
public:
  explicit GNormAccumulator(Eigen::Index m = 0) : sum_sq_(DynVector::Zero(m)) {}

  void add(const DynVector& g) {
    sum_sq_.array() += g.array().square();
    ++count_;
  }
  long count() const { return count_; }
  DynVector norms() const {
    if (count_ == 0) throw Error("no density-gradient samples accumulated");
    return (sum_sq_ / static_cast<double>(count_)).cwiseSqrt();
  }

private:
  DynVector sum_sq_;
  long count_ = 0;
};

struct DensityGradientResult {
  DynVector g_norms;
  LyapunovEstimate les;
  long samples = 0;
  bool diverged = false;
};

/// Callback receiving (step, state, g) after each step past spinup.
template <class Vector>
using GradientSink = std::function<void(long, const Vector&, const DynVector&)>;

/// Runs the basis and second-order recursions alone along a trajectory and
/// collects L² norms of g and the Lyapunov exponents of the m leading
/// directions. For maps with m = n there is no neutral direction, so this is
/// the complete density-gradient computation.
template <class Map>
DensityGradientResult run_density_gradient(const Map& map, typename Map::Vector x, Eigen::Index m, long steps,
                                           long spinup, CounterRng& rng,
                                           const GradientSink<typename Map::Vector>& sink = {}) {
  using Vector = typename Map::Vector;
  if (m < 1 || m > map.dim()) throw ConfigError("m must lie in [1, n]");
  if (steps <= spinup) throw ConfigError("steps must exceed spinup");
  TangentFrame<Vector> frame(map.dim(), m, rng);
  SecondOrderFrame<Vector> second(map.dim(), m);
  GNormAccumulator acc(m);
  DensityGradientResult out;
  for (long k = 0; k < steps; ++k) {
    if (k >= spinup && k > 0) {
      accumulate_les(frame);
      acc.add(second.g);
      if (sink) sink(k, x, second.g);
    }
    const auto lin = map.linearize(x);
    const auto tangents = push_basis<Map>(frame, lin);
    push_second_order<Map>(second, lin, tangents, frame.R_inv);
    compute_dR_and_g(second, frame.Q);
    x = lin.next();
    guard_state(x, k);
    if (!second.g.allFinite()) {
      out.diverged = true;
      break;
    }
  }
  out.samples = acc.count();
  if (out.samples > 0) {
    out.g_norms = acc.norms();
    out.les = lyapunov_estimate(frame, map.dt(), spinup);
  }
  return out;
}

}  // namespace chaos
