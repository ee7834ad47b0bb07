#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "chaos/error.hpp"

namespace chaos {

/// Scalar objective J(x) with analytic gradient.
///
///  moment p      J = (1/n) Σ (xⁱ)ᵖ         (spatially averaged power)
///  component i   J = xⁱ
///  exp i         J = exp(xⁱ/4) / 10000
///  wave w        J = exp(sin z) sin z,  z = w·x
class Objective {
public:
  enum class Kind { moment, component, exp_quarter, wave };

  static Objective moment(int p) {
    if (p < 1) throw ConfigError("moment objective needs p >= 1");
    Objective o(Kind::moment);
    o.power_ = p;
    return o;
  }
  static Objective component(Eigen::Index i) {
    Objective o(Kind::component);
    o.index_ = i;
    return o;
  }
  static Objective exp_quarter(Eigen::Index i) {
    Objective o(Kind::exp_quarter);
    o.index_ = i;
    return o;
  }
  static Objective wave(std::vector<double> weights) {
    if (weights.empty()) throw ConfigError("wave objective needs weights");
    Objective o(Kind::wave);
    o.weights_ = std::move(weights);
    return o;
  }

  /// Parses `mean`, `energy`, `moment:p`, `x`, `y`, `z`, `component:i`,
  /// `exp:i`, `wave:w1,w2,...` (indices zero-based).
  static Objective parse(std::string_view spec) {
    const auto colon = spec.find(':');
    const std::string_view head = spec.substr(0, colon);
    const std::string_view tail = colon == std::string_view::npos ? "" : spec.substr(colon + 1);
    if (head == "mean") return moment(1);
    if (head == "energy") return moment(2);
    if (head == "x") return component(0);
    if (head == "y") return component(1);
    if (head == "z") return component(2);
    if (head == "moment") return moment(static_cast<int>(number(tail, spec)));
    if (head == "component") return component(static_cast<Eigen::Index>(number(tail, spec)));
    if (head == "exp") return exp_quarter(tail.empty() ? 0 : static_cast<Eigen::Index>(number(tail, spec)));
    if (head == "wave") {
      std::vector<double> w;
      std::string_view rest = tail;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        w.push_back(number(rest.substr(0, comma), spec));
        rest = comma == std::string_view::npos ? "" : rest.substr(comma + 1);
      }
      return wave(std::move(w));
    }
    throw ConfigError("unknown objective '" + std::string(spec) + "'");
  }

  Kind kind() const { return kind_; }

  std::string describe() const {
    switch (kind_) {
      case Kind::moment: return "moment:" + std::to_string(power_);
      case Kind::component: return "component:" + std::to_string(index_);
      case Kind::exp_quarter: return "exp:" + std::to_string(index_);
      case Kind::wave: {
        std::string s = "wave:";
        for (std::size_t i = 0; i < weights_.size(); ++i) {
          if (i) s += ',';
          char buf[32];
          auto res = std::to_chars(buf, buf + sizeof buf, weights_[i]);
          s.append(buf, res.ptr);
        }
        return s;
      }
    }
    return {};
  }

  static double ipow(double base, int p) {
    double out = 1.0;
    for (int i = 0; i < p; ++i) out *= base;
    return out;
  }

  template <class V>
  double value(const V& x) const {
    check(x);
    switch (kind_) {
      case Kind::moment: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) acc += ipow(x[i], power_);
        return acc / static_cast<double>(x.size());
      }
      case Kind::component: return x[index_];
      case Kind::exp_quarter: return std::exp(x[index_] / 4.0) / 10000.0;
      case Kind::wave: {
        const double sz = std::sin(phase(x));
        return std::exp(sz) * sz;
      }
    }
    return 0.0;
  }

  template <class V>
  V gradient(const V& x) const {
    check(x);
    V g = V::Zero(x.size());
    switch (kind_) {
      case Kind::moment:
        for (Eigen::Index i = 0; i < x.size(); ++i)
          g[i] = static_cast<double>(power_) / static_cast<double>(x.size()) * ipow(x[i], power_ - 1);
        break;
      case Kind::component: g[index_] = 1.0; break;
      case Kind::exp_quarter: g[index_] = std::exp(x[index_] / 4.0) / 40000.0; break;
      case Kind::wave: {
        const double z = phase(x);
        const double sz = std::sin(z);
        const double dj = std::exp(sz) * (1.0 + sz) * std::cos(z);
        for (std::size_t i = 0; i < weights_.size(); ++i) g[static_cast<Eigen::Index>(i)] = dj * weights_[i];
        break;
      }
    }
    return g;
  }

private:
  explicit Objective(Kind k) : kind_(k) {}

  static double number(std::string_view s, std::string_view spec) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ConfigError("bad number in objective '" + std::string(spec) + "'");
    return v;
  }

  template <class V>
  void check(const V& x) const {
    if ((kind_ == Kind::component || kind_ == Kind::exp_quarter) && (index_ < 0 || index_ >= x.size()))
      throw DimensionError("objective component index out of range");
    if (kind_ == Kind::wave && static_cast<Eigen::Index>(weights_.size()) > x.size())
      throw DimensionError("wave objective has more weights than state components");
  }

  template <class V>
  double phase(const V& x) const {
    double z = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) z += weights_[i] * x[static_cast<Eigen::Index>(i)];
    return z;
  }

  Kind kind_;
  int power_ = 1;
  Eigen::Index index_ = 0;
  std::vector<double> weights_;
};

}  // namespace chaos
