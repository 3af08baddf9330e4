#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "emglabel/time_series.hpp"

namespace emglabel::dsp {

/// Normalized second-order section, a0 == 1:
///   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
};

// Cascade of biquads in transposed direct form II. Causal and stateful so
// the same object can filter a live stream sample by sample.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections);

  double step(double x) noexcept;
  void reset() noexcept;

  /// Filters a whole block starting from zero state.
  std::vector<double> apply(std::span<const double> input);

  /// Complex frequency response at f_hz for sample rate fs_hz.
  std::complex<double> response(double f_hz, double fs_hz) const;

  const std::vector<Biquad>& sections() const noexcept { return sections_; }

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;
};

/// Butterworth band-pass via analog prototype, LP->BP transform and the
/// prewarped bilinear transform. `order` is the prototype order, the cascade
/// has `order` sections and unit gain at the geometric center frequency.
std::vector<Biquad> design_butterworth_bandpass(double low_hz, double high_hz, int order,
                                                double fs_hz);

/// Second-order IIR notch (RBJ cookbook form).
Biquad design_notch(double f0_hz, double q, double fs_hz);

TimeSeries bandpass_filter(const TimeSeries& series, double low_hz = 1.0, double high_hz = 120.0,
                           int order = 2);

TimeSeries notch_filter(const TimeSeries& series, double f0_hz = 60.0, double q = 30.0);

// ---------------------------------------------------------------------------
// Singular spectrum analysis

struct SsaDecomposition {
  std::size_t window_len = 0;    // L
  std::size_t original_len = 0;  // N
  std::vector<double> singular_values;          // non-increasing
  std::vector<std::vector<double>> components;  // one elementary series per eigentriple
};

/// min(N/2, 128), raised to 2 for very short series.
std::size_t default_ssa_window(std::size_t n);

/// Embeds the series in the L x K trajectory matrix (column j holds samples
/// j..j+L-1), takes the SVD and diagonal-averages every eigentriple.
SsaDecomposition ssa_decompose(const TimeSeries& series, std::size_t window_len);

/// Reconstruction from the `components` largest eigentriples.
TimeSeries ssa_denoise(const TimeSeries& series, std::size_t window_len, std::size_t components = 1);

/// Same as above with the default window.
TimeSeries ssa_denoise(const TimeSeries& series);

}  // namespace emglabel::dsp
