#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace itpi {

enum class ErrorCode {
  domain,
  malformed_path,
  weak_field,
  config,
  insufficient_ensemble,
  not_time_invertible,
  inversion_failure,
  boost_reorder,
  regime,
  integrator,
  diagnostics,
  io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::malformed_path: return "malformed_path";
    case ErrorCode::weak_field: return "weak_field";
    case ErrorCode::config: return "config";
    case ErrorCode::insufficient_ensemble: return "insufficient_ensemble";
    case ErrorCode::not_time_invertible: return "not_time_invertible";
    case ErrorCode::inversion_failure: return "inversion_failure";
    case ErrorCode::boost_reorder: return "boost_reorder";
    case ErrorCode::regime: return "regime";
    case ErrorCode::integrator: return "integrator";
    case ErrorCode::diagnostics: return "diagnostics";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the engine carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Segment-indexed failures (reordered boosts, failed inversions).
class SegmentError : public Error {
 public:
  SegmentError(ErrorCode code, std::size_t segment, const std::string& what)
      : Error(code, "segment " + std::to_string(segment) + ": " + what), segment_(segment) {}

  std::size_t segment() const noexcept { return segment_; }

 private:
  std::size_t segment_;
};

}  // namespace itpi
