#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssmgan {

enum class ErrorCode {
  // record ingestion
  MalformedHeader,
  UnsupportedFormat,
  TruncatedData,
  MalformedLine,
  NonMonotoneIndex,
  AnnotationOutOfRange,
  ChannelLengthMismatch,
  // preprocessing
  InvalidCutoff,
  DegenerateSignal,
  EmptyClass,
  // shape models
  TooFewSignals,
  DegenerateCluster,
  // autodiff
  ShapeMismatch,
  NonFiniteValue,
  NotScalarOutput,
  UnsupportedSecondOrder,
  // training
  NonFiniteLoss,
  // metrics
  EmptySequence,
  EmptySet,
  // generic
  InvalidArgument,
  IoError,
  FormatError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonMonotoneIndex: return "NonMonotoneIndex";
    case ErrorCode::AnnotationOutOfRange: return "AnnotationOutOfRange";
    case ErrorCode::ChannelLengthMismatch: return "ChannelLengthMismatch";
    case ErrorCode::InvalidCutoff: return "InvalidCutoff";
    case ErrorCode::DegenerateSignal: return "DegenerateSignal";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::TooFewSignals: return "TooFewSignals";
    case ErrorCode::DegenerateCluster: return "DegenerateCluster";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NotScalarOutput: return "NotScalarOutput";
    case ErrorCode::UnsupportedSecondOrder: return "UnsupportedSecondOrder";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

/// Numeric failures (divergence, NaN) as opposed to bad input data.
inline bool is_numeric(ErrorCode code) {
  return code == ErrorCode::NonFiniteValue || code == ErrorCode::NonFiniteLoss ||
         code == ErrorCode::UnsupportedSecondOrder || code == ErrorCode::NotScalarOutput;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ssmgan
