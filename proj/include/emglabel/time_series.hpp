#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emglabel {

/// Uniformly sampled scalar channel.
struct TimeSeries {
  std::vector<double> samples;
  double sample_rate_hz = 256.0;
  double t0 = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::span<const double> view() const noexcept { return samples; }

  /// Timestamp of sample i. Every module derives sample times through this
  /// expression so merged rows and synthetic streams agree bit for bit.
  double time_at(std::size_t i) const noexcept {
    return t0 + static_cast<double>(i) / sample_rate_hz;
  }
};

/// Throws InvalidInput unless the series is non-empty, has a positive rate
/// and only finite samples. `what` names the argument in the message.
void require_valid(const TimeSeries& series, const char* what);

bool all_finite(std::span<const double> values) noexcept;

}  // namespace emglabel
