#include <cmath>
#include <string>

#include "emglabel/error.hpp"
#include "emglabel/time_series.hpp"

namespace emglabel {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid_parameter";
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::Format: return "format";
    case ErrorCode::Data: return "data";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::PacketFormat: return "packet_format";
    case ErrorCode::Unmergeable: return "unmergeable";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::InsufficientBoundaries: return "insufficient_boundaries";
    case ErrorCode::InternalConsistency: return "internal_consistency";
    case ErrorCode::Normalization: return "normalization";
    case ErrorCode::InvalidTrainingSet: return "invalid_training_set";
    case ErrorCode::Convergence: return "convergence";
    case ErrorCode::Io: return "io";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_valid(const TimeSeries& series, const char* what) {
  if (series.empty()) fail(ErrorCode::InvalidInput, std::string(what) + ": empty series");
  if (!(series.sample_rate_hz > 0.0) || !std::isfinite(series.sample_rate_hz)) {
    fail(ErrorCode::InvalidInput, std::string(what) + ": sample rate must be positive");
  }
  if (!all_finite(series.samples)) {
    fail(ErrorCode::InvalidInput, std::string(what) + ": non-finite sample");
  }
}

}  // namespace emglabel
