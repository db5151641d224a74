#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace porogen {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes: ConfigError -> 2, NumericalError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(std::string const& what, std::size_t pivot)
      : NumericalError(what), pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

class NumericalBreakdown : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// PCG hit its iteration cap. Carries the best iterate seen.
class ConvergenceFailure : public NumericalError {
 public:
  ConvergenceFailure(std::string const& what, std::vector<double> best,
                     std::size_t iterations, double residual)
      : NumericalError(what),
        best_(std::move(best)),
        iterations_(iterations),
        residual_(residual) {}
  std::vector<double> const& best_iterate() const { return best_; }
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::vector<double> best_;
  std::size_t iterations_;
  double residual_;
};

class MeshDegenerate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class MissingExtension : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EmptyPhase : public Error {
 public:
  using Error::Error;
};

}  // namespace porogen
