#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <concepts>
#include <numbers>
#include <string>
#include <string_view>

#include "chaos/error.hpp"
#include "chaos/rng.hpp"

namespace chaos {

enum class ModelKind { flow, discrete_map };

/// Named real parameters of a model. Parameters are addressed by name at the
/// interface and by index inside the hot loops.
template <std::size_t K>
class ParamSet {
public:
  constexpr ParamSet(std::array<std::string_view, K> names, std::array<double, K> values)
      : names_(names), values_(values) {}

  static constexpr std::size_t size() { return K; }

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < K; ++i)
      if (names_[i] == name) return i;
    throw ParameterError("unknown parameter '" + std::string(name) + "'");
  }
  double get(std::string_view name) const { return values_[index(name)]; }
  void set(std::string_view name, double value) { values_[index(name)] = value; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::string_view name(std::size_t i) const { return names_[i]; }

private:
  std::array<std::string_view, K> names_;
  std::array<double, K> values_;
};

/// The contraction interface every system provides. For flows `eval` is the
/// right-hand side f; for discrete maps it is the map φ itself (reduced to the
/// fundamental domain where the model has one). All derivatives are
/// analytic:
///   jvp(x, v)          Df·v
///   hvp(x, a, b)       D²f(a, b), symmetric bilinear
///   dparam(x, p)       ∂f/∂s_p
///   mixed(x, p, v)     (D ∂f/∂s_p)·v
template <class M>
concept SystemModel = requires(const M& m, const typename M::Vector& x, std::size_t p,
                               std::string_view name, CounterRng& rng) {
  typename M::Vector;
  { M::kind } -> std::convertible_to<ModelKind>;
  { m.dim() } -> std::convertible_to<Eigen::Index>;
  { m.name() } -> std::convertible_to<std::string_view>;
  { m.param_index(name) } -> std::convertible_to<std::size_t>;
  { m.param(name) } -> std::convertible_to<double>;
  { m.eval(x) } -> std::convertible_to<typename M::Vector>;
  { m.jvp(x, x) } -> std::convertible_to<typename M::Vector>;
  { m.hvp(x, x, x) } -> std::convertible_to<typename M::Vector>;
  { m.dparam(x, p) } -> std::convertible_to<typename M::Vector>;
  { m.mixed(x, p, x) } -> std::convertible_to<typename M::Vector>;
  { m.initial_state(rng) } -> std::convertible_to<typename M::Vector>;
};

namespace detail {
template <class V>
void check_len(const V& v, Eigen::Index n, const char* what) {
  require_dim(static_cast<long>(v.size()), static_cast<long>(n), what);
}
}  // namespace detail

// ---------------------------------------------------------------------------
/// dx/dt = σ(y−x), dy/dt = x(ρ−z) − y, dz/dt = xy − βz.
class Lorenz63 {
public:
  using Vector = Eigen::Vector3d;
  static constexpr ModelKind kind = ModelKind::flow;

  Lorenz63(double sigma = 10.0, double rho = 28.0, double beta = 8.0 / 3.0)
      : params_({"sigma", "rho", "beta"}, {sigma, rho, beta}) {}

  static constexpr std::string_view name() { return "lorenz63"; }
  static constexpr Eigen::Index dim() { return 3; }
  std::size_t param_index(std::string_view n) const { return params_.index(n); }
  double param(std::string_view n) const { return params_.get(n); }
  void set_param(std::string_view n, double value) { params_.set(n, value); }
  const ParamSet<3>& params() const { return params_; }

  Vector eval(const Vector& u) const {
    const double s = params_[0], r = params_[1], b = params_[2];
    return {s * (u[1] - u[0]), u[0] * (r - u[2]) - u[1], u[0] * u[1] - b * u[2]};
  }

  Vector jvp(const Vector& u, const Vector& v) const {
    const double s = params_[0], r = params_[1], b = params_[2];
    return {s * (v[1] - v[0]), v[0] * (r - u[2]) - u[0] * v[2] - v[1],
            v[0] * u[1] + u[0] * v[1] - b * v[2]};
  }

  Vector hvp(const Vector&, const Vector& a, const Vector& c) const {
    return {0.0, -(a[0] * c[2] + a[2] * c[0]), a[0] * c[1] + a[1] * c[0]};
  }

  Vector dparam(const Vector& u, std::size_t p) const {
    switch (p) {
      case 0: return {u[1] - u[0], 0.0, 0.0};
      case 1: return {0.0, u[0], 0.0};
      default: return {0.0, 0.0, -u[2]};
    }
  }

  Vector mixed(const Vector&, std::size_t p, const Vector& v) const {
    switch (p) {
      case 0: return {v[1] - v[0], 0.0, 0.0};
      case 1: return {0.0, v[0], 0.0};
      default: return {0.0, 0.0, -v[2]};
    }
  }

  /// A point near the attractor; the caller's warmup removes the transient.
  Vector initial_state(CounterRng& rng) const {
    return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), params_[1] - 1.0 + rng.uniform(-1.0, 1.0)};
  }

private:
  ParamSet<3> params_;
};

// ---------------------------------------------------------------------------
/// dxⁱ/dt = (xⁱ⁺¹ − xⁱ⁻²) xⁱ⁻¹ − xⁱ + F with periodic indices.
class Lorenz96 {
public:
  using Vector = Eigen::VectorXd;
  static constexpr ModelKind kind = ModelKind::flow;

  explicit Lorenz96(Eigen::Index n = 40, double forcing = 8.0)
      : n_(n), params_({"F"}, {forcing}) {
    if (n < 4) throw DimensionError("lorenz96 requires n >= 4");
  }

  static constexpr std::string_view name() { return "lorenz96"; }
  Eigen::Index dim() const { return n_; }
  std::size_t param_index(std::string_view n) const { return params_.index(n); }
  double param(std::string_view n) const { return params_.get(n); }
  void set_param(std::string_view n, double value) { params_.set(n, value); }
  const ParamSet<1>& params() const { return params_; }

  Vector eval(const Vector& x) const {
    detail::check_len(x, n_, "lorenz96 state");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = (x[up(i)] - x[down2(i)]) * x[down(i)] - x[i] + params_[0];
    return out;
  }

  Vector jvp(const Vector& x, const Vector& v) const {
    detail::check_len(v, n_, "lorenz96 tangent");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = (v[up(i)] - v[down2(i)]) * x[down(i)] + (x[up(i)] - x[down2(i)]) * v[down(i)] - v[i];
    return out;
  }

  Vector hvp(const Vector&, const Vector& a, const Vector& b) const {
    detail::check_len(a, n_, "lorenz96 tangent");
    detail::check_len(b, n_, "lorenz96 tangent");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = (a[up(i)] - a[down2(i)]) * b[down(i)] + (b[up(i)] - b[down2(i)]) * a[down(i)];
    return out;
  }

  Vector dparam(const Vector&, std::size_t) const { return Vector::Ones(n_); }
  Vector mixed(const Vector&, std::size_t, const Vector&) const { return Vector::Zero(n_); }

  Vector initial_state(CounterRng& rng) const {
    Vector x(n_);
    for (Eigen::Index i = 0; i < n_; ++i) x[i] = params_[0] + rng.normal();
    return x;
  }

private:
  Eigen::Index up(Eigen::Index i) const { return i + 1 == n_ ? 0 : i + 1; }
  Eigen::Index down(Eigen::Index i) const { return i == 0 ? n_ - 1 : i - 1; }
  Eigen::Index down2(Eigen::Index i) const { return i >= 2 ? i - 2 : i + n_ - 2; }

  Eigen::Index n_;
  ParamSet<1> params_;
};

// ---------------------------------------------------------------------------
/// Coupled sawtooth map on the n-torus:
///   xⁱ ← 2xⁱ + s sin(xⁱ⁺¹ − xⁱ) + t sin(xⁱ)  (mod 2π),  xⁿ⁺¹ = x¹.
/// `eval` reduces to [0, 2π); `eval_unwrapped` is the smooth lift used by the
/// derivative oracles.
class Sawtooth {
public:
  using Vector = Eigen::VectorXd;
  static constexpr ModelKind kind = ModelKind::discrete_map;
  static constexpr double two_pi = 2.0 * std::numbers::pi;

  explicit Sawtooth(Eigen::Index n = 2, double s = 0.0, double t = 0.0)
      : n_(n), params_({"s", "t"}, {s, t}) {
    if (n < 1) throw DimensionError("sawtooth requires n >= 1");
  }

  static constexpr std::string_view name() { return "sawtooth"; }
  Eigen::Index dim() const { return n_; }
  std::size_t param_index(std::string_view n) const { return params_.index(n); }
  double param(std::string_view n) const { return params_.get(n); }
  void set_param(std::string_view n, double value) { params_.set(n, value); }
  const ParamSet<2>& params() const { return params_; }

  static double wrap(double v) {
    double r = std::fmod(v, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;  // fmod of tiny negatives rounds up to 2π
    return r;
  }

  Vector eval_unwrapped(const Vector& x) const {
    detail::check_len(x, n_, "sawtooth state");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = 2.0 * x[i] + params_[0] * std::sin(x[up(i)] - x[i]) + params_[1] * std::sin(x[i]);
    return out;
  }

  Vector eval(const Vector& x) const { return eval_unwrapped(x).unaryExpr(&Sawtooth::wrap); }

  Vector jvp(const Vector& x, const Vector& v) const {
    detail::check_len(v, n_, "sawtooth tangent");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = 2.0 * v[i] + params_[0] * std::cos(x[up(i)] - x[i]) * (v[up(i)] - v[i]) +
               params_[1] * std::cos(x[i]) * v[i];
    return out;
  }

  Vector hvp(const Vector& x, const Vector& a, const Vector& b) const {
    detail::check_len(a, n_, "sawtooth tangent");
    detail::check_len(b, n_, "sawtooth tangent");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = -params_[0] * std::sin(x[up(i)] - x[i]) * (a[up(i)] - a[i]) * (b[up(i)] - b[i]) -
               params_[1] * std::sin(x[i]) * a[i] * b[i];
    return out;
  }

  Vector dparam(const Vector& x, std::size_t p) const {
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = p == 0 ? std::sin(x[up(i)] - x[i]) : std::sin(x[i]);
    return out;
  }

  Vector mixed(const Vector& x, std::size_t p, const Vector& v) const {
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = p == 0 ? std::cos(x[up(i)] - x[i]) * (v[up(i)] - v[i]) : std::cos(x[i]) * v[i];
    return out;
  }

  Vector initial_state(CounterRng& rng) const {
    Vector x(n_);
    for (Eigen::Index i = 0; i < n_; ++i) x[i] = rng.uniform(0.0, two_pi);
    return x;
  }

private:
  Eigen::Index up(Eigen::Index i) const { return i + 1 == n_ ? 0 : i + 1; }

  Eigen::Index n_;
  ParamSet<2> params_;
};

// ---------------------------------------------------------------------------
/// Kuramoto-Sivashinsky with advection,
///   u_t = −(u + c) u_x − u_xx − u_xxxx,  u = u_x = 0 at x = 0 and x = L,
/// on `nodes` uniform nodes. The two boundary nodes carry the Dirichlet
/// value, leaving n = nodes − 2 interior unknowns. The Neumann condition
/// enters through mirror ghost nodes, u₋₁ = u₁ and u_{M} = u_{M−2}, which
/// makes the second-order centred stencils
///   D1 = (u₊₁ − u₋₁)/2h,  D2 = (u₊₁ − 2u + u₋₁)/h²,
///   D4 = (u₊₂ − 4u₊₁ + 6u − 4u₋₁ + u₋₂)/h⁴
/// applicable at every interior node. No one-sided stencil is needed.
class KuramotoSivashinsky {
public:
  using Vector = Eigen::VectorXd;
  static constexpr ModelKind kind = ModelKind::flow;

  explicit KuramotoSivashinsky(double length = 128.0, Eigen::Index nodes = 513, double c = 0.0)
      : length_(length), n_(nodes - 2), h_(length / static_cast<double>(nodes - 1)),
        params_({"c"}, {c}) {
    if (nodes < 5) throw DimensionError("ks requires at least 5 nodes");
    if (!(length > 0.0)) throw ParameterError("ks domain length must be positive");
  }

  static constexpr std::string_view name() { return "ks"; }
  Eigen::Index dim() const { return n_; }
  double length() const { return length_; }
  double spacing() const { return h_; }
  std::size_t param_index(std::string_view n) const { return params_.index(n); }
  double param(std::string_view n) const { return params_.get(n); }
  void set_param(std::string_view n, double value) { params_.set(n, value); }
  const ParamSet<1>& params() const { return params_; }

  Vector eval(const Vector& u) const {
    detail::check_len(u, n_, "ks state");
    const double c = params_[0];
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = -(u[i] + c) * d1(u, i) - d2(u, i) - d4(u, i);
    return out;
  }

  Vector jvp(const Vector& u, const Vector& v) const {
    detail::check_len(v, n_, "ks tangent");
    const double c = params_[0];
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      out[i] = -(v[i] * d1(u, i) + (u[i] + c) * d1(v, i)) - d2(v, i) - d4(v, i);
    return out;
  }

  Vector hvp(const Vector&, const Vector& a, const Vector& b) const {
    detail::check_len(a, n_, "ks tangent");
    detail::check_len(b, n_, "ks tangent");
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i) out[i] = -(a[i] * d1(b, i) + b[i] * d1(a, i));
    return out;
  }

  Vector dparam(const Vector& u, std::size_t) const {
    Vector out(n_);
    for (Eigen::Index i = 0; i < n_; ++i) out[i] = -d1(u, i);
    return out;
  }

  Vector mixed(const Vector&, std::size_t, const Vector& v) const { return dparam(v, 0); }

  Vector initial_state(CounterRng& rng) const {
    Vector u(n_);
    for (Eigen::Index i = 0; i < n_; ++i) u[i] = 0.5 * rng.normal();
    return u;
  }

private:
  // Value at interior index i (node i+1), extended by the boundary and ghost rules.
  double at(const Vector& u, Eigen::Index i) const {
    if (i >= 0 && i < n_) return u[i];
    if (i == -1 || i == n_) return 0.0;
    return i == -2 ? u[0] : u[n_ - 1];
  }
  double d1(const Vector& u, Eigen::Index i) const {
    return (at(u, i + 1) - at(u, i - 1)) / (2.0 * h_);
  }
  double d2(const Vector& u, Eigen::Index i) const {
    return (at(u, i + 1) - 2.0 * u[i] + at(u, i - 1)) / (h_ * h_);
  }
  double d4(const Vector& u, Eigen::Index i) const {
    const double h2 = h_ * h_;
    return (at(u, i + 2) - 4.0 * at(u, i + 1) + 6.0 * u[i] - 4.0 * at(u, i - 1) + at(u, i - 2)) /
           (h2 * h2);
  }

  double length_;
  Eigen::Index n_;
  double h_;
  ParamSet<1> params_;
};

static_assert(SystemModel<Lorenz63>);
static_assert(SystemModel<Lorenz96>);
static_assert(SystemModel<Sawtooth>);
static_assert(SystemModel<KuramotoSivashinsky>);

}  // namespace chaos
