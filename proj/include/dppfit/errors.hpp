#pragma once

#include <stdexcept>
#include <string>

namespace dppfit {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix expected to be positive definite failed its Cholesky pivot test.
/// `pivot` is the 1-based index of the first failing pivot.
struct NotPositiveDefinite : Error {
  int pivot;
  explicit NotPositiveDefinite(int pivot_index)
      : Error("matrix is not positive definite (pivot " +
              std::to_string(pivot_index) + ")"),
        pivot(pivot_index) {}
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Iterative eigenvalue estimation hit its iteration cap.
struct NoConvergence : Error {
  int iteration_cap;
  explicit NoConvergence(int cap)
      : Error("eigenvalue iteration did not converge within " +
              std::to_string(cap) + " iterations"),
        iteration_cap(cap) {}
};

/// A principal submatrix L_Y was numerically singular while evaluating the
/// model. `observation` is the 1-based index of the offending subset.
struct SingularSubmatrix : Error {
  int observation;
  explicit SingularSubmatrix(int observation_index)
      : Error("observed subset " + std::to_string(observation_index) +
              " has a numerically singular kernel submatrix"),
        observation(observation_index) {}
};

struct GroundSetTooLarge : Error {
  using Error::Error;
};

struct EigenFailure : Error {
  using Error::Error;
};

struct InvalidCount : Error {
  using Error::Error;
};

struct GenerationFailed : Error {
  using Error::Error;
};

/// The projected-gradient baseline hit a singular K - I_{Y^c} factor.
struct SingularIterate : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// File parsing failure; `line` is 1-based, 0 when not line-specific.
struct ParseError : Error {
  int line;
  ParseError(const std::string& what, int line_number)
      : Error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
};

}  // namespace dppfit
