#pragma once

#include <stdexcept>
#include <string>

namespace chaos {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Raised when a trajectory leaves the admissible region (non-finite or
/// ‖x‖∞ above the overflow guard). `step` is -1 when unknown.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, long step = -1)
      : Error(step < 0 ? what : what + " at step " + std::to_string(step)), step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

/// The pushed-forward tangent basis lost rank (|R_ii| below threshold).
class DegenerateTangentError : public Error {
public:
  using Error::Error;
};

/// The flow vector vanished, so the neutral direction is undefined.
class FixedPointError : public Error {
public:
  using Error::Error;
};

/// The flow vector lies in span(Q): the Schur complement is singular.
class TangencyError : public Error {
public:
  using Error::Error;
};

class FitError : public Error {
public:
  using Error::Error;
};

inline void require_dim(long got, long expected, const char* what) {
  if (got != expected)
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                         ", got " + std::to_string(got));
}

}  // namespace chaos
