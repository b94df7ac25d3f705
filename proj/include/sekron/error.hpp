#pragma once

#include <stdexcept>
#include <string>

namespace sekron {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kOutOfRange,
  kRankExceeded,
  kNonConvergence,
  kCapExceeded,
  kNoFeasibleConfig,
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncatedPayload,
  kTrailingBytes,
  kMalformedHeader,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kOutOfRange: return "index out of range";
    case ErrorCode::kRankExceeded: return "rank exceeds full rank";
    case ErrorCode::kNonConvergence: return "svd did not converge";
    case ErrorCode::kCapExceeded: return "combinatorial cap exceeded";
    case ErrorCode::kNoFeasibleConfig: return "no feasible configuration";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kTrailingBytes: return "trailing bytes after payload";
    case ErrorCode::kMalformedHeader: return "malformed header";
  }
  return "unknown error";
}

/// Exception type thrown by every sekron operation. `code()` is stable and
/// maps one-to-one onto the CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace detail
}  // namespace sekron
