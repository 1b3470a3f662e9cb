#pragma once

#include <stdexcept>
#include <string>

namespace dkmc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix that should be positive semi-definite failed to factorize
/// even after jitter escalation.
struct NotPsdError : Error {
  using Error::Error;
};

struct InvalidConfigError : Error {
  using Error::Error;
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct TrainingDivergedError : Error {
  using Error::Error;
};

struct UnsupportedDegreeError : Error {
  using Error::Error;
};

struct UnsupportedDimensionError : Error {
  using Error::Error;
};

struct EmptyPathsError : Error {
  using Error::Error;
};

struct InvalidAxisError : Error {
  using Error::Error;
};

}  // namespace dkmc
