#pragma once

#include <stdexcept>
#include <string>

namespace adalag {

/// Rejected model or algorithm parameters (non-SPD covariance, |phi| >= 1, ...).
class InvalidParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear-algebra failure: singular innovation covariance, non-invertible
/// filter covariance, and similar.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All importance weights vanished at some time step. The message names the
/// step; this signals model/data mismatch rather than a recoverable state.
class WeightCollapseError : public std::runtime_error {
 public:
  explicit WeightCollapseError(int t)
      : std::runtime_error("all particle weights are zero at time t=" + std::to_string(t)),
        time_index(t) {}
  int time_index;
};

/// A categorical draw was requested from an all-zero weight vector.
class DegenerateWeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backward weights w^l q(xi^l, x) vanished for some target particle.
class DegenerateBackwardWeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A genealogy lookup reached outside the retained window.
class RetentionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The active-estimator cap was exceeded.
class ActiveSetOverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adalag
