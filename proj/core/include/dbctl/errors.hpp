#pragma once

#include <stdexcept>
#include <string>

namespace dbctl {

/// Process exit codes shared by the library error hierarchy and the CLI.
enum class ExitCode : int {
  kSuccess = 0,
  kValidation = 1,
  kDataQuality = 2,
  kInfeasible = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

/// Malformed input: wrong shapes, non-finite entries, bad parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The data is not rich enough (persistence of excitation, Assumption-style
/// rank conditions) for the requested operation.
class RankError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kDataQuality; }
};

/// A convex program or synthesis step has no solution for the given data.
class InfeasibleError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kInfeasible; }
};

/// Iterations that fail to converge, singular pivots, overflow.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

}  // namespace dbctl
