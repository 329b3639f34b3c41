#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace milac {

enum class ErrorCode {
  DimensionMismatch,
  NotSymmetric,
  BracketInvalid,
  SingularSystem,
  NoFiniteRealization,
  InvalidScattering,
  RankDeficient,
  NegativeSinr,
  ZeroColumn,
  InfeasibleStart,
  InfeasibleInit,
  NonmonotoneObjective,
  NumericalFailure,
  Io,
  MalformedFile,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoFiniteRealization: return "NoFiniteRealization";
    case ErrorCode::InvalidScattering: return "InvalidScattering";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NegativeSinr: return "NegativeSinr";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::InfeasibleInit: return "InfeasibleInit";
    case ErrorCode::NonmonotoneObjective: return "NonmonotoneObjective";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace milac
