#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace valmetric {

enum class ErrorKind {
  // input / data
  Io,
  Parse,
  NonMonotoneTime,
  NonFiniteValue,
  LengthMismatch,
  EmptyOverlap,
  GridMismatch,
  TooShort,
  // numerical preconditions of individual metrics
  ZeroRange,
  ZeroMean,
  ZeroVariance,
  ZeroEnergy,
  DegenerateCorridor,
  // argument validation
  OutOfRange,
  InvalidArgument,
  Config,
  // pipeline
  AllFeaturesMissing,
  TooFewPairs,
  TooFewRows,
  NonConvergence,
  MissingFeature,
  // rating service
  EmptySession,
  DuplicatePair,
  DuplicateSession,
  UnknownSession,
  UnknownPair,
  AmbiguousPair,
  NoRatedPairs,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyOverlap: return "EmptyOverlap";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::ZeroRange: return "ZeroRange";
    case ErrorKind::ZeroMean: return "ZeroMean";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::ZeroEnergy: return "ZeroEnergy";
    case ErrorKind::DegenerateCorridor: return "DegenerateCorridor";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
    case ErrorKind::AllFeaturesMissing: return "AllFeaturesMissing";
    case ErrorKind::TooFewPairs: return "TooFewPairs";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::MissingFeature: return "MissingFeature";
    case ErrorKind::EmptySession: return "EmptySession";
    case ErrorKind::DuplicatePair: return "DuplicatePair";
    case ErrorKind::DuplicateSession: return "DuplicateSession";
    case ErrorKind::UnknownSession: return "UnknownSession";
    case ErrorKind::UnknownPair: return "UnknownPair";
    case ErrorKind::AmbiguousPair: return "AmbiguousPair";
    case ErrorKind::NoRatedPairs: return "NoRatedPairs";
  }
  return "Unknown";
}

/// Coarse grouping used for process exit codes.
enum class ErrorCategory { Config, Data, Numerical };

inline ErrorCategory category(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::OutOfRange:
      return ErrorCategory::Config;
    case ErrorKind::ZeroRange:
    case ErrorKind::ZeroMean:
    case ErrorKind::ZeroVariance:
    case ErrorKind::ZeroEnergy:
    case ErrorKind::DegenerateCorridor:
    case ErrorKind::NonConvergence:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace valmetric
