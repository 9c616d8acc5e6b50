#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace taskarith {

enum class ErrorKind {
  parameter,
  capacity,
  sampling,
  shape,
  numeric,
  divergence,
  provenance,
  convergence,
  degenerate,
  no_solution,
  config,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
 public:
  explicit KindedError(const std::string& message) : Error(K, message) {}
};

using ParameterError = KindedError<ErrorKind::parameter>;
using CapacityError = KindedError<ErrorKind::capacity>;
using SamplingError = KindedError<ErrorKind::sampling>;
using ShapeError = KindedError<ErrorKind::shape>;
using NumericError = KindedError<ErrorKind::numeric>;
using ProvenanceError = KindedError<ErrorKind::provenance>;
using DegenerateEstimatorError = KindedError<ErrorKind::degenerate>;
using NoSolutionError = KindedError<ErrorKind::no_solution>;
using ConfigError = KindedError<ErrorKind::config>;
using IoError = KindedError<ErrorKind::io>;

/// Raised when SGD produces a non-finite loss or parameter.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, std::size_t iteration)
      : Error(ErrorKind::divergence, message), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Raised when power iteration exhausts its budget. Carries the last
/// Frobenius residual so the caller can decide whether to retry.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double last_residual)
      : Error(ErrorKind::convergence, message), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace taskarith
