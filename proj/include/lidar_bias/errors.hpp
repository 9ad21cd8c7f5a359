#pragma once

#include <stdexcept>
#include <string>

namespace lidar_bias {

/// Input outside the mathematical domain of an operation (bad angle, z <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical routine failed; carries the best estimate it reached.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double estimate, double error_bound)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

/// The closed-form model has no valid peak at the requested (d, theta).
class ModelValidityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampled waveform maximum sits on the window boundary.
class WindowTooNarrowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regression design is rank deficient or the search did not converge.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or config content.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace lidar_bias
