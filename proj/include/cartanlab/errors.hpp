#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cartanlab {

enum class ErrorCode {
  InvalidInput,
  DimensionMismatch,
  NotCartanEligible,
  NonCommuting,
  ProportionalExponents,
  Overflow,
  IncompleteEnumeration,
  MissingChamber,
  Infeasible,
  NoConvergence,
  WordTooLong,
  NoContraction,
  StalledResidual,
  DegenerateQR,
  TailNotBounded,
  NonMonotoneChart,
  DirectionFlip,
  Io,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotCartanEligible: return "NotCartanEligible";
    case ErrorCode::NonCommuting: return "NonCommuting";
    case ErrorCode::ProportionalExponents: return "ProportionalExponents";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::IncompleteEnumeration: return "IncompleteEnumeration";
    case ErrorCode::MissingChamber: return "MissingChamber";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::WordTooLong: return "WordTooLong";
    case ErrorCode::NoContraction: return "NoContraction";
    case ErrorCode::StalledResidual: return "StalledResidual";
    case ErrorCode::DegenerateQR: return "DegenerateQR";
    case ErrorCode::TailNotBounded: return "TailNotBounded";
    case ErrorCode::NonMonotoneChart: return "NonMonotoneChart";
    case ErrorCode::DirectionFlip: return "DirectionFlip";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class LabError : public std::runtime_error {
 public:
  LabError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw LabError(code, message);
}

}  // namespace cartanlab
