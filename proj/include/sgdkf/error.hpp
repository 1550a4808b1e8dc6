#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sgdkf {

enum class ErrorKind {
  NotSchur,
  NotSPD,
  NotSymmetric,
  NoConvergence,
  NonFiniteEvaluation,
  NonFiniteState,
  LogDomain,
  SurfaceSaturation,
  InvalidParameter,
  SingularInnovationCovariance,
  ThetaOutOfRange,
  DegenerateA,
  DivergenceDetected,
  BadSpec,
  TraceMismatch,
  ConfigInvalid,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSchur: return "NotSchur";
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::LogDomain: return "LogDomain";
    case ErrorKind::SurfaceSaturation: return "SurfaceSaturation";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::SingularInnovationCovariance: return "SingularInnovationCovariance";
    case ErrorKind::ThetaOutOfRange: return "ThetaOutOfRange";
    case ErrorKind::DegenerateA: return "DegenerateA";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::TraceMismatch: return "TraceMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sgdkf
