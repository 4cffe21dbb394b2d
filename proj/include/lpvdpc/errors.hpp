#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpvdpc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hankel depth or window split outside the admissible range.
class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

/// Sequence lengths or vector dimensions that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Initial window shorter than the recursion lag.
class InitializationError : public Error {
 public:
  using Error::Error;
};

/// Plant state became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Recorded input is not persistently exciting of the requested order.
class ExcitationError : public Error {
 public:
  ExcitationError(const std::string& what, long achieved_rank, long required_rank)
      : Error(what), achieved_rank_(achieved_rank), required_rank_(required_rank) {}

  long achieved_rank() const { return achieved_rank_; }
  long required_rank() const { return required_rank_; }

 private:
  long achieved_rank_;
  long required_rank_;
};

/// Dictionary lacks a passing PE certificate for the requested depth.
class UncertifiedDictionaryError : public Error {
 public:
  using Error::Error;
};

/// The requested windows are not a trajectory of the data-generating system.
class InconsistentTrajectoryError : public Error {
 public:
  InconsistentTrajectoryError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A receding-horizon step had no feasible input.
class InfeasibleStepError : public Error {
 public:
  InfeasibleStepError(const std::string& what, long step) : Error(what), step_(step) {}

  long step() const { return step_; }

 private:
  long step_;
};

/// Malformed input file; line and column are 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpvdpc
