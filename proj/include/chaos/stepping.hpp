#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "chaos/error.hpp"
#include "chaos/models.hpp"

namespace chaos {

enum class Scheme { rk2, rk4, discrete };

inline Scheme parse_scheme(std::string_view s) {
  if (s == "rk2") return Scheme::rk2;
  if (s == "rk4") return Scheme::rk4;
  if (s == "discrete") return Scheme::discrete;
  throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

inline std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::rk2: return "rk2";
    case Scheme::rk4: return "rk4";
    case Scheme::discrete: return "discrete";
  }
  return "?";
}

/// States with ‖x‖∞ above this are treated as blow-up.
inline constexpr double kOverflowGuard = 1e8;

template <class V>
void guard_state(const V& x, long step = -1) {
  if (!x.allFinite()) throw DivergenceError("non-finite state", step);
  if (x.template lpNorm<Eigen::Infinity>() > kOverflowGuard)
    throw DivergenceError("state exceeded overflow guard", step);
}

/// Butcher tableau of an explicit Runge-Kutta scheme with at most four stages.
struct Tableau {
  int stages;
  std::array<std::array<double, 4>, 4> a;
  std::array<double, 4> b;

  static constexpr Tableau midpoint() {
    return {2, {{{0, 0, 0, 0}, {0.5, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}}, {0, 1, 0, 0}};
  }
  static constexpr Tableau classic_rk4() {
    return {4,
            {{{0, 0, 0, 0}, {0.5, 0, 0, 0}, {0, 0.5, 0, 0}, {0, 0, 1, 0}}},
            {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0}};
  }
};

/// One-step map φ of a model together with its derivative contractions.
///
/// For flows, φ is an explicit Runge-Kutta step with stages
///   yᵢ = x + Δt Σⱼ aᵢⱼ kⱼ,  kᵢ = f(yᵢ),  φ(x) = x + Δt Σ bᵢ kᵢ,
/// and every contraction is the same recursion differentiated stage by stage:
///   Dφ·v         dyᵢ = v + Δt Σ aᵢⱼ dkⱼ,           dkᵢ = Df(yᵢ)dyᵢ
///   D²φ(v,a)     d²yᵢ = Δt Σ aᵢⱼ d²kⱼ,             d²kᵢ = D²f(yᵢ)(dyᵢᵛ,dyᵢᵃ) + Df(yᵢ)d²yᵢ
///   ∂sφ          pyᵢ = Δt Σ aᵢⱼ pkⱼ,               pkᵢ = ∂sf(yᵢ) + Df(yᵢ)pyᵢ
///   D∂sφ·v       myᵢ = Δt Σ aᵢⱼ mkⱼ,
///                mkᵢ = D∂sf(yᵢ)dyᵢᵛ + D²f(yᵢ)(dyᵢᵛ,pyᵢ) + Df(yᵢ)myᵢ
/// For the midpoint tableau these reduce term by term to the closed forms
///   Dφv = v + Δt Df_p v + Δt²/2 Df_p Df_k v, etc.
/// For discrete maps every contraction forwards to the model.
template <SystemModel Model>
class StepMap {
public:
  using Vector = typename Model::Vector;

  /// Per-stage tangent dyᵢ of one direction, reused across second-order
  /// contractions at the same base point.
  struct Tangent {
    std::array<Vector, 4> dy;
    Vector image;  // Dφ·v
  };

  /// Stage points of φ at a fixed base point x. All contractions at x are
  /// evaluated from this cache, so the stage states are computed once per step.
  class Linearization {
  public:
    Linearization(const StepMap& map, const Vector& x) : map_(&map), x_(x) {
      if (map.is_discrete()) {
        next_ = map.model().eval(x);
        return;
      }
      const auto& tab = map.tableau_;
      const double h = map.dt_;
      next_ = x;
      for (int i = 0; i < tab.stages; ++i) {
        y_[i] = x;
        for (int j = 0; j < i; ++j)
          if (tab.a[i][j] != 0.0) y_[i] += (h * tab.a[i][j]) * k_[j];
        k_[i] = map.model().eval(y_[i]);
        if (tab.b[i] != 0.0) next_ += (h * tab.b[i]) * k_[i];
      }
    }

    const Vector& base() const { return x_; }
    const Vector& next() const { return next_; }

    Tangent tangent(const Vector& v) const {
      Tangent t;
      if (map_->is_discrete()) {
        t.dy[0] = v;
        t.image = model().jvp(x_, v);
        return t;
      }
      const auto& tab = map_->tableau_;
      const double h = map_->dt_;
      std::array<Vector, 4> dk;
      t.image = v;
      for (int i = 0; i < tab.stages; ++i) {
        t.dy[i] = v;
        for (int j = 0; j < i; ++j)
          if (tab.a[i][j] != 0.0) t.dy[i] += (h * tab.a[i][j]) * dk[j];
        dk[i] = model().jvp(y_[i], t.dy[i]);
        if (tab.b[i] != 0.0) t.image += (h * tab.b[i]) * dk[i];
      }
      return t;
    }

    Vector jvp(const Vector& v) const { return tangent(v).image; }

    Vector hvp(const Tangent& tv, const Tangent& ta) const {
      if (map_->is_discrete()) return model().hvp(x_, tv.dy[0], ta.dy[0]);
      const auto& tab = map_->tableau_;
      const double h = map_->dt_;
      std::array<Vector, 4> d2k;
      Vector out = Vector::Zero(x_.size());
      for (int i = 0; i < tab.stages; ++i) {
        d2k[i] = model().hvp(y_[i], tv.dy[i], ta.dy[i]);
        if (i > 0) {
          Vector d2y = Vector::Zero(x_.size());
          bool any = false;
          for (int j = 0; j < i; ++j)
            if (tab.a[i][j] != 0.0) {
              d2y += (h * tab.a[i][j]) * d2k[j];
              any = true;
            }
          if (any) d2k[i] += model().jvp(y_[i], d2y);
        }
        if (tab.b[i] != 0.0) out += (h * tab.b[i]) * d2k[i];
      }
      return out;
    }

    Vector hvp(const Vector& v, const Vector& a) const { return hvp(tangent(v), tangent(a)); }

    Vector param() const {
      const std::size_t p = map_->active_;
      if (map_->is_discrete()) return model().dparam(x_, p);
      const auto& tab = map_->tableau_;
      const double h = map_->dt_;
      Vector out = Vector::Zero(x_.size());
      for (int i = 0; i < tab.stages; ++i) {
        Vector py = Vector::Zero(x_.size());
        for (int j = 0; j < i; ++j)
          if (tab.a[i][j] != 0.0) py += (h * tab.a[i][j]) * pk_at(j);
        pk_[i] = model().dparam(y_[i], p);
        if (i > 0) pk_[i] += model().jvp(y_[i], py);
        py_[i] = py;
        if (tab.b[i] != 0.0) out += (h * tab.b[i]) * pk_[i];
      }
      have_param_ = true;
      return out;
    }

    Vector mixed(const Tangent& tv) const {
      const std::size_t p = map_->active_;
      if (map_->is_discrete()) return model().mixed(x_, p, tv.dy[0]);
      if (!have_param_) (void)param();
      const auto& tab = map_->tableau_;
      const double h = map_->dt_;
      std::array<Vector, 4> mk;
      Vector out = Vector::Zero(x_.size());
      for (int i = 0; i < tab.stages; ++i) {
        mk[i] = model().mixed(y_[i], p, tv.dy[i]);
        if (i > 0) {
          mk[i] += model().hvp(y_[i], tv.dy[i], py_[i]);
          Vector my = Vector::Zero(x_.size());
          bool any = false;
          for (int j = 0; j < i; ++j)
            if (tab.a[i][j] != 0.0) {
              my += (h * tab.a[i][j]) * mk[j];
              any = true;
            }
          if (any) mk[i] += model().jvp(y_[i], my);
        }
        if (tab.b[i] != 0.0) out += (h * tab.b[i]) * mk[i];
      }
      return out;
    }

    Vector mixed(const Vector& v) const { return mixed(tangent(v)); }

  private:
    const Model& model() const { return map_->model(); }
    const Vector& pk_at(int j) const { return pk_[j]; }

    const StepMap* map_;
    Vector x_;
    Vector next_;
    std::array<Vector, 4> y_;
    std::array<Vector, 4> k_;
    mutable std::array<Vector, 4> pk_;
    mutable std::array<Vector, 4> py_;
    mutable bool have_param_ = false;
  };

  /// `dt` is ignored for discrete maps. The active parameter is resolved by
  /// name once here.
  StepMap(Model model, Scheme scheme, double dt, std::string_view active_param)
      : model_(std::move(model)), scheme_(scheme), dt_(dt),
        active_(model_.param_index(active_param)), active_name_(active_param) {
    if constexpr (Model::kind == ModelKind::discrete_map) {
      if (scheme != Scheme::discrete) throw ConfigError("discrete-map models require scheme 'discrete'");
      dt_ = 1.0;
    } else {
      if (scheme == Scheme::discrete) throw ConfigError("flow models require an rk2 or rk4 scheme");
      if (!(dt > 0.0)) throw ConfigError("time step must be positive");
      tableau_ = scheme == Scheme::rk2 ? Tableau::midpoint() : Tableau::classic_rk4();
    }
  }

  const Model& model() const { return model_; }
  Scheme scheme() const { return scheme_; }
  /// Time per step; 1 for discrete maps so exponents come out per step.
  double dt() const { return dt_; }
  std::size_t active_index() const { return active_; }
  const std::string& active_name() const { return active_name_; }
  Eigen::Index dim() const { return model_.dim(); }
  static constexpr bool is_discrete() { return Model::kind == ModelKind::discrete_map; }

  Linearization linearize(const Vector& x) const { return Linearization(*this, x); }

  Vector step(const Vector& x) const {
    Vector next = linearize(x).next();
    guard_state(next);
    return next;
  }
  Vector step_jvp(const Vector& x, const Vector& v) const { return linearize(x).jvp(v); }
  Vector step_hvp(const Vector& x, const Vector& v, const Vector& a) const {
    return linearize(x).hvp(v, a);
  }
  Vector step_param(const Vector& x) const { return linearize(x).param(); }
  Vector step_mixed(const Vector& x, const Vector& v) const { return linearize(x).mixed(v); }

  /// Flow vector f(x) used for the neutral direction (flows only).
  Vector flow(const Vector& x) const { return model_.eval(x); }

  /// Same map with the active parameter shifted (used by FD references).
  StepMap with_param(std::string_view name, double value) const {
    StepMap copy = *this;
    copy.model_.set_param(name, value);
    return copy;
  }

private:
  Model model_;
  Scheme scheme_;
  double dt_;
  Tableau tableau_{};
  std::size_t active_;
  std::string active_name_;
};

}  // namespace chaos
