#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "chaos/error.hpp"
#include "chaos/linalg.hpp"
#include "chaos/objective.hpp"
#include "chaos/schur.hpp"
#include "chaos/srb.hpp"
#include "chaos/stepping.hpp"
#include "chaos/tangent.hpp"

namespace chaos {

/// Ring buffer of the last K scalars with their running sum. The sum is
/// rebuilt from scratch every time the write head wraps, so rounding error
/// in the running sum cannot grow with run length.
class CorrelationBuffer {
public:
  explicit CorrelationBuffer(long capacity) : values_(static_cast<std::size_t>(capacity), 0.0) {
    if (capacity < 1) throw ConfigError("correlation length K must be >= 1");
  }

  void push(double value) {
    sum_ += value - values_[head_];
    values_[head_] = value;
    if (++head_ == values_.size()) {
      head_ = 0;
      sum_ = 0.0;
      for (double v : values_) sum_ += v;
    }
    if (size_ < values_.size()) ++size_;
  }

  bool full() const { return size_ == values_.size(); }
  long capacity() const { return static_cast<long>(values_.size()); }
  double sum() const { return sum_; }

private:
  std::vector<double> values_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  double sum_ = 0.0;
};

/// Linear response split into its three parts. `total` is always the plain
/// sum of the other three.
struct SensitivityBreakdown {
  double stable = 0.0;
  double neutral = 0.0;
  double unstable = 0.0;
  double total = 0.0;
  double mean_objective = 0.0;  // ⟨J⟩ over the same samples
  long n_samples = 0;
  LyapunovEstimate les;
  bool diverged = false;
  std::string reason;
};

/// Derivatives of the projection coefficients along the unstable basis:
/// b(i,j) = ∂_{qʲ}cⁱ, b0(j) = ∂_{qʲ}c⁰, wʲ = ∂_{ξʲ}v, with the right-hand
/// sides d, d0 of the (m+1)m linear system that determines them.
template <class Vector>
struct UnstableFrame {
  std::vector<Vector> w;
  Matrix b;
  DynVector b0;
  Matrix d;
  DynVector d0;
  double u_scalar = 0.0;

  UnstableFrame() = default;
  UnstableFrame(Eigen::Index n, Eigen::Index m)
      : w(static_cast<std::size_t>(m), Vector::Zero(n)), b(Matrix::Zero(m, m)), b0(DynVector::Zero(m)),
        d(Matrix::Zero(m, m)), d0(DynVector::Zero(m)) {}
};

/// Everything one step of the unstable-coefficient recursion reads.
template <class Map>
struct UnstableStepInputs {
  using Vector = typename Map::Vector;
  const typename Map::Linearization& lin;               // at x_k
  const typename Map::Tangent& v_old;                   // stage tangents of v_k
  const std::vector<typename Map::Tangent>& q_old;      // stage tangents of Q_k columns
  const TangentFrame<Vector>& frame;                    // Q, R⁻¹, v, c, c⁰ at k+1
  const SecondOrderFrame<Vector>& second;               // g, p at k+1
  const Vector& x_next;
  const Vector& f_next;
  const Vector& r;                                      // Dφv_k + χ
  const SchurFactor& schur;
};

/// Advances w and computes b, b0, u = Σᵢ(b^{i,i} + cⁱgⁱ):
///   ∂_{ξ_k^i} r = D²φ(v_k, q_kⁱ) + Dφ w_kⁱ + D∂sφ q_kⁱ, rescaled by R⁻¹
///   d^{0,j} = v·Df qʲ + ∂ʲr·f − Σ cˡ pˡʲ·f − c⁰ Df qʲ·f
///   d^{i,j} = pⁱʲ·(r − c⁰f) + qⁱ·∂ʲr − c⁰ qⁱ·Df qʲ
///   b^{:,j} = S⁻¹(d^{:,j} − d^{0,j}/(f·f) Qᵀf),  b^{0,j} = (d^{0,j} − Qᵀf·b^{:,j})/(f·f)
///   wʲ = ∂ʲr − Σ bˡʲqˡ − Σ cˡpˡʲ − b^{0,j}f − c⁰ Df qʲ
template <class Map>
void unstable_coefficient_step(UnstableFrame<typename Map::Vector>& uf, const Map& map,
                               const UnstableStepInputs<Map>& in) {
  using Vector = typename Map::Vector;
  const auto& q = in.frame.Q;
  const Eigen::Index m = q.cols();
  const auto n = q.rows();
  const auto& r_inv = in.frame.R_inv;
  const double ff = in.schur.ff;

  std::vector<Vector> dr_old(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& ti = in.q_old[static_cast<std::size_t>(i)];
    dr_old[static_cast<std::size_t>(i)] =
        in.lin.hvp(in.v_old, ti) + in.lin.jvp(uf.w[static_cast<std::size_t>(i)]) + in.lin.mixed(ti);
  }
  std::vector<Vector> dr(static_cast<std::size_t>(m), Vector::Zero(n));
  std::vector<Vector> dfq(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) dr[static_cast<std::size_t>(j)] += r_inv(i, j) * dr_old[static_cast<std::size_t>(i)];
    dfq[static_cast<std::size_t>(j)] = map.model().jvp(in.x_next, Vector(q.col(j)));
  }

  const Vector& f = in.f_next;
  const double c0 = in.frame.c0;
  const DynVector& c = in.frame.c;
  const Vector r_minus = in.r - c0 * f;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vector& drj = dr[static_cast<std::size_t>(j)];
    const Vector& dfqj = dfq[static_cast<std::size_t>(j)];
    double cpf = 0.0;
    for (Eigen::Index l = 0; l < m; ++l) cpf += c[l] * in.second.p_at(l, j).dot(f);
    uf.d0[j] = in.frame.v.dot(dfqj) + drj.dot(f) - cpf - c0 * dfqj.dot(f);
    for (Eigen::Index i = 0; i < m; ++i)
      uf.d(i, j) = in.second.p_at(i, j).dot(r_minus) + q.col(i).dot(drj) - c0 * q.col(i).dot(dfqj);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    uf.b.col(j) = in.schur.S_inv * (uf.d.col(j) - (uf.d0[j] / ff) * in.schur.qf);
    uf.b0[j] = (uf.d0[j] - in.schur.qf.dot(uf.b.col(j))) / ff;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    Vector& w = uf.w[static_cast<std::size_t>(j)];
    w = dr[static_cast<std::size_t>(j)] - q * uf.b.col(j) - uf.b0[j] * f - c0 * dfq[static_cast<std::size_t>(j)];
    for (Eigen::Index l = 0; l < m; ++l) w -= c[l] * in.second.p_at(l, j);
  }
  uf.u_scalar = uf.b.diagonal().sum() + c.dot(in.second.g);
}

struct FullS3Options {
  Eigen::Index m = 1;  // unstable dimension
  long steps = 0;      // N, total iterations including spinup
  long spinup = 0;     // T
  long corr = 1;       // K
};

/// Space-split sensitivity for hyperbolic flows: stable, neutral and unstable
/// contributions accumulated along one trajectory. Each advance() is one
/// iteration k → k+1 of the recursions; contributions at step k are
/// collected once k ≥ T and both correlation buffers hold K values.
template <class Map>
class FullSpaceSplit {
public:
  using Vector = typename Map::Vector;

  FullSpaceSplit(const Map& map, Objective objective, FullS3Options opts, Vector x0, CounterRng& rng)
      : map_(&map), objective_(std::move(objective)), opts_(opts), x_(std::move(x0)),
        frame_(map.dim(), validated(opts, map.dim()).m, rng), second_(map.dim(), opts.m),
        unstable_(map.dim(), opts.m), u_buffer_(opts.corr), c0_buffer_(opts.corr) {
    static_assert(!Map::is_discrete(), "the full space-split method needs a flow");
  }

  void advance() {
    const auto& map = *map_;
    if (k_ >= opts_.spinup && u_buffer_.full() && c0_buffer_.full()) {
      const double j = objective_.value(x_);
      const Vector dj = objective_.gradient(x_);
      objective_sum_ += j;
      stable_ += dj.dot(frame_.v);
      unstable_sum_ -= j * u_buffer_.sum();
      neutral_ += dj.dot(map.flow(x_)) * c0_buffer_.sum();
      accumulate_les(frame_);
      ++samples_;
    }
    const auto lin = map.linearize(x_);
    const auto q_old = push_basis<Map>(frame_, lin);
    push_second_order<Map>(second_, lin, q_old, frame_.R_inv);
    compute_dR_and_g(second_, frame_.Q);
    basis_derivatives(second_, frame_.Q);

    Vector x_next = lin.next();
    guard_state(x_next, k_);
    const Vector f_next = map.flow(x_next);
    schur_ = schur(frame_.Q, f_next);

    const auto v_old = lin.tangent(frame_.v);
    const Vector chi = lin.param();
    const Vector r = regularized_step_full(frame_, v_old.image, chi, f_next, schur_);
    unstable_coefficient_step<Map>(unstable_, map,
                                   {lin, v_old, q_old, frame_, second_, x_next, f_next, r, schur_});
    u_buffer_.push(unstable_.u_scalar);
    c0_buffer_.push(frame_.c0);
    last_r_ = r;
    x_ = std::move(x_next);
    ++k_;
  }

  void run() {
    while (k_ < opts_.steps) advance();
  }

  /// Contributions averaged over the collected samples.
  SensitivityBreakdown breakdown() const {
    SensitivityBreakdown out;
    out.n_samples = samples_;
    if (samples_ > 0) {
      const double n = static_cast<double>(samples_);
      out.stable = stable_ / n;
      out.neutral = neutral_ / n;
      out.unstable = unstable_sum_ / n;
      out.mean_objective = objective_sum_ / n;
      out.les = lyapunov_estimate(frame_, map_->dt(), opts_.spinup);
    }
    out.total = out.stable + out.neutral + out.unstable;
    if (!std::isfinite(out.total) || !second_.g.allFinite()) {
      out.diverged = true;
      out.reason = "non-finite accumulator or density gradient";
    }
    return out;
  }

  long step_index() const { return k_; }
  const Vector& state() const { return x_; }
  const TangentFrame<Vector>& tangent() const { return frame_; }
  TangentFrame<Vector>& tangent() { return frame_; }
  const SecondOrderFrame<Vector>& second_order() const { return second_; }
  SecondOrderFrame<Vector>& second_order() { return second_; }
  const UnstableFrame<Vector>& unstable() const { return unstable_; }
  UnstableFrame<Vector>& unstable() { return unstable_; }
  const SchurFactor& last_schur() const { return schur_; }
  const Vector& last_r() const { return last_r_; }

private:
  static const FullS3Options& validated(const FullS3Options& opts, Eigen::Index n) {
    if (opts.m < 1 || opts.m >= n) throw ConfigError("full S3 requires 1 <= m < n");
    if (opts.spinup < 1 || opts.corr < 1) throw ConfigError("full S3 requires T >= 1 and K >= 1");
    return opts;
  }

  const Map* map_;
  Objective objective_;
  FullS3Options opts_;
  Vector x_;
  TangentFrame<Vector> frame_;
  SecondOrderFrame<Vector> second_;
  UnstableFrame<Vector> unstable_;
  CorrelationBuffer u_buffer_;
  CorrelationBuffer c0_buffer_;
  SchurFactor schur_;
  Vector last_r_;
  long k_ = 0;
  long samples_ = 0;
  double stable_ = 0.0;
  double neutral_ = 0.0;
  double unstable_sum_ = 0.0;
  double objective_sum_ = 0.0;
};

struct ReducedS3Options {
  Eigen::Index m_ext = 1;  // directions projected out
  long steps = 0;          // N, including spinup
  long spinup = 0;         // T
};

/// Stable-only space-split sensitivity: the tangent solution is kept
/// orthogonal to the m_ext leading Lyapunov directions, and the estimate is
/// the ergodic average of DJ·v.
template <class Map>
class ReducedSpaceSplit {
public:
  using Vector = typename Map::Vector;

  ReducedSpaceSplit(const Map& map, Objective objective, ReducedS3Options opts, Vector x0, CounterRng& rng)
      : map_(&map), objective_(std::move(objective)), opts_(opts), x_(std::move(x0)),
        frame_(map.dim(), validated(opts, map.dim()).m_ext, rng) {}

  void advance() {
    const auto& map = *map_;
    if (k_ >= opts_.spinup && k_ > 0) {
      objective_sum_ += objective_.value(x_);
      stable_ += objective_.gradient(x_).dot(frame_.v);
      accumulate_les(frame_);
      ++samples_;
    }
    const auto lin = map.linearize(x_);
    push_basis<Map>(frame_, lin);
    regularized_step_reduced(frame_, lin.jvp(frame_.v), lin.param());
    x_ = lin.next();
    guard_state(x_, k_);
    ++k_;
  }

  void run() {
    while (k_ < opts_.steps) advance();
  }

  SensitivityBreakdown breakdown() const {
    SensitivityBreakdown out;
    out.n_samples = samples_;
    if (samples_ > 0) {
      out.stable = stable_ / static_cast<double>(samples_);
      out.mean_objective = objective_sum_ / static_cast<double>(samples_);
      out.les = lyapunov_estimate(frame_, map_->dt(), opts_.spinup);
    }
    out.total = out.stable + out.neutral + out.unstable;
    if (!std::isfinite(out.total)) {
      out.diverged = true;
      out.reason = "non-finite accumulator";
    }
    return out;
  }

  long step_index() const { return k_; }
  const Vector& state() const { return x_; }
  const TangentFrame<Vector>& tangent() const { return frame_; }
  TangentFrame<Vector>& tangent() { return frame_; }

private:
  static const ReducedS3Options& validated(const ReducedS3Options& opts, Eigen::Index n) {
    if (opts.m_ext < 1 || opts.m_ext > n) throw ConfigError("reduced S3 requires 1 <= m_ext <= n");
    return opts;
  }

  const Map* map_;
  Objective objective_;
  ReducedS3Options opts_;
  Vector x_;
  TangentFrame<Vector> frame_;
  long k_ = 0;
  long samples_ = 0;
  double stable_ = 0.0;
  double objective_sum_ = 0.0;
};

/// Advances x by `steps` primal steps.
template <class Map>
typename Map::Vector warm_up(const Map& map, typename Map::Vector x, long steps) {
  for (long k = 0; k < steps; ++k) {
    x = map.linearize(x).next();
    guard_state(x, k);
  }
  return x;
}

namespace detail {
inline SensitivityBreakdown diverged_result(const std::exception& e) {
  SensitivityBreakdown out;
  out.diverged = true;
  out.reason = e.what();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.stable = out.neutral = out.unstable = out.total = out.mean_objective = nan;
  return out;
}

/// Numerical breakdown ends the run as diverged; configuration errors propagate.
template <class Solver>
SensitivityBreakdown run_guarded(Solver& solver) {
  try {
    solver.run();
  } catch (const DivergenceError& e) {
    return diverged_result(e);
  } catch (const TangencyError& e) {
    return diverged_result(e);
  } catch (const DegenerateTangentError& e) {
    return diverged_result(e);
  } catch (const FixedPointError& e) {
    return diverged_result(e);
  }
  return solver.breakdown();
}
}  // namespace detail

/// Full space-split run from a random initial state: `warmup` primal steps,
/// then `opts.steps` iterations of the recursions. Numerical breakdown
/// (blow-up, tangency, rank loss) marks the result diverged instead of
/// throwing. Deterministic in the RNG state.
template <class Map>
SensitivityBreakdown run_full_s3(const Map& map, const Objective& objective, const FullS3Options& opts,
                                 long warmup, CounterRng& rng) {
  if (opts.steps <= opts.spinup + opts.corr) throw ConfigError("full S3 requires N > T + K");
  typename Map::Vector x0;
  try {
    x0 = warm_up(map, map.model().initial_state(rng), warmup);
  } catch (const DivergenceError& e) {
    return detail::diverged_result(e);
  }
  FullSpaceSplit<Map> solver(map, objective, opts, std::move(x0), rng);
  return detail::run_guarded(solver);
}

template <class Map>
SensitivityBreakdown run_reduced_s3(const Map& map, const Objective& objective, const ReducedS3Options& opts,
                                    long warmup, CounterRng& rng) {
  if (opts.steps <= opts.spinup) throw ConfigError("reduced S3 requires N > T");
  typename Map::Vector x0;
  try {
    x0 = warm_up(map, map.model().initial_state(rng), warmup);
  } catch (const DivergenceError& e) {
    return detail::diverged_result(e);
  }
  ReducedSpaceSplit<Map> solver(map, objective, opts, std::move(x0), rng);
  return detail::run_guarded(solver);
}

/// Time average of J over `steps` steps after `warmup` primal steps.
template <class Map>
double time_average(const Map& map, const Objective& objective, long steps, long warmup, CounterRng& rng) {
  auto x = warm_up(map, map.model().initial_state(rng), warmup);
  double acc = 0.0;
  for (long k = 0; k < steps; ++k) {
    acc += objective.value(x);
    x = map.linearize(x).next();
    guard_state(x, k);
  }
  return acc / static_cast<double>(steps);
}

}  // namespace chaos
