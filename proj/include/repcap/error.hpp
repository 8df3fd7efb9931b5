#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repcap {

enum class ErrorCode {
  InsufficientSamples,
  DimensionMismatch,
  NotPositiveDefinite,
  InvalidProbability,
  DegenerateVector,
  InvalidTargetDim,
  NoUsableClasses,
  InsufficientClasses,
  DegenerateHull,
  InvalidArgument,
  Io,
  Format,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Numeric failures (as opposed to bad input) map to CLI exit code 3.
bool is_numeric_failure(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace repcap
