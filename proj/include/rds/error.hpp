#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rds {

/// Failure categories surfaced by the numerical routines. The CLI maps
/// these onto process exit codes.
enum class ErrorCode {
  precondition,
  fails_h1,
  no_convergence,
  no_bracket,
  convexity_violation,
  validation_failed,
  diagonal_hit,
  orbit_merged,
  bad_band,
  too_few_hits,
  window_too_narrow,
  divergent,
  inconclusive,
  config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::precondition: return "PRECONDITION";
    case ErrorCode::fails_h1: return "FAILS_H1";
    case ErrorCode::no_convergence: return "NO_CONVERGENCE";
    case ErrorCode::no_bracket: return "NO_BRACKET";
    case ErrorCode::convexity_violation: return "CONVEXITY_VIOLATION";
    case ErrorCode::validation_failed: return "VALIDATION_FAILED";
    case ErrorCode::diagonal_hit: return "DIAGONAL_HIT";
    case ErrorCode::orbit_merged: return "ORBIT_MERGED";
    case ErrorCode::bad_band: return "BAD_BAND";
    case ErrorCode::too_few_hits: return "TOO_FEW_HITS";
    case ErrorCode::window_too_narrow: return "WINDOW_TOO_NARROW";
    case ErrorCode::divergent: return "DIVERGENT";
    case ErrorCode::inconclusive: return "INCONCLUSIVE";
    case ErrorCode::config: return "CONFIG";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace rds
