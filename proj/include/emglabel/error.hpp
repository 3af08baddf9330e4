#pragma once

#include <stdexcept>
#include <string>

namespace emglabel {

// Error categories surfaced by every module. The numeric values are mirrored
// by emgl_status in the C API, keep them in sync.
enum class ErrorCode {
  InvalidParameter = 1,
  InvalidInput = 2,
  Format = 3,
  Data = 4,
  DegenerateGeometry = 5,
  PacketFormat = 6,
  Unmergeable = 7,
  InsufficientData = 8,
  InsufficientBoundaries = 9,
  InternalConsistency = 10,
  Normalization = 11,
  InvalidTrainingSet = 12,
  Convergence = 13,
  Io = 14,
  Config = 15,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace emglabel
