#pragma once

#include <stdexcept>
#include <string>

namespace graphpde {

enum class ErrorCode {
  DegenerateInput,
  DegenerateField,
  ShapeMismatch,
  EmptyGraph,
  NonFiniteGradient,
  NonFiniteState,
  MaxStepsExceeded,
  StepUnderflow,
  LinearSolveFailure,
  TimeNotOnGrid,
  TimeMisalignment,
  ZeroReference,
  InvalidArgument,
  IoFailure,
  FormatError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DegenerateField: return "DegenerateField";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorCode::TimeNotOnGrid: return "TimeNotOnGrid";
    case ErrorCode::TimeMisalignment: return "TimeMisalignment";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

/// Library-wide exception carrying a stable error code (the CLI maps codes to
/// its `error: <code>: <message>` diagnostic lines).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) raise(code, message);
}

}  // namespace graphpde
