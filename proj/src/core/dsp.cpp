#include "emglabel/dsp.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "emglabel/error.hpp"

namespace emglabel::dsp {

namespace {

using cd = std::complex<double>;

void check_band_edge(double f, double fs, const char* name) {
  if (!std::isfinite(f) || !(f > 0.0) || !(f < fs / 2.0)) {
    fail(ErrorCode::InvalidParameter,
         std::string(name) + " must lie in (0, Nyquist), got " + std::to_string(f));
  }
}

void check_rate(double fs) {
  if (!(fs > 0.0) || !std::isfinite(fs)) {
    fail(ErrorCode::InvalidParameter, "sample rate must be positive");
  }
}

cd biquad_response(const Biquad& s, cd z_inv) {
  const cd num = s.b0 + z_inv * (s.b1 + z_inv * s.b2);
  const cd den = 1.0 + z_inv * (s.a1 + z_inv * s.a2);
  return num / den;
}

}  // namespace

SosFilter::SosFilter(std::vector<Biquad> sections)
    : sections_(std::move(sections)), state_(sections_.size(), {0.0, 0.0}) {}

double SosFilter::step(double x) noexcept {
  double v = x;
  for (std::size_t k = 0; k < sections_.size(); ++k) {
    const Biquad& s = sections_[k];
    auto& st = state_[k];
    const double y = s.b0 * v + st[0];
    st[0] = s.b1 * v - s.a1 * y + st[1];
    st[1] = s.b2 * v - s.a2 * y;
    v = y;
  }
  return v;
}

void SosFilter::reset() noexcept {
  for (auto& st : state_) st = {0.0, 0.0};
}

std::vector<double> SosFilter::apply(std::span<const double> input) {
  reset();
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = step(input[i]);
  return out;
}

std::complex<double> SosFilter::response(double f_hz, double fs_hz) const {
  const cd z_inv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
  cd h = 1.0;
  for (const auto& s : sections_) h *= biquad_response(s, z_inv);
  return h;
}

std::vector<Biquad> design_butterworth_bandpass(double low_hz, double high_hz, int order,
                                                double fs_hz) {
  check_rate(fs_hz);
  check_band_edge(low_hz, fs_hz, "low_hz");
  check_band_edge(high_hz, fs_hz, "high_hz");
  if (!(low_hz < high_hz)) fail(ErrorCode::InvalidParameter, "low_hz must be below high_hz");
  if (order < 1 || order > 32) fail(ErrorCode::InvalidParameter, "order must be in [1, 32]");

  const double pi = std::numbers::pi;
  const double k2 = 2.0 * fs_hz;
  const double wl = k2 * std::tan(pi * low_hz / fs_hz);
  const double wh = k2 * std::tan(pi * high_hz / fs_hz);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  std::vector<cd> poles;
  const int n = order;
  for (int k = 0; k < n; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + n + 1) / (2.0 * n));
    const cd pb = p * bw;
    const cd disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
    for (const cd s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
      poles.push_back((k2 + s) / (k2 - s));
    }
  }

  // Pair each upper-half-plane pole with its conjugate, real poles pairwise.
  std::vector<cd> upper;
  std::vector<double> real;
  for (const cd z : poles) {
    if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z))) {
      real.push_back(z.real());
    } else if (z.imag() > 0.0) {
      upper.push_back(z);
    }
  }
  std::sort(upper.begin(), upper.end(),
            [](cd a, cd b) { return std::arg(a) < std::arg(b); });
  std::sort(real.begin(), real.end());

  std::vector<Biquad> sections;
  for (const cd z : upper) {
    Biquad s{1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)};
    sections.push_back(s);
  }
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) {
    Biquad s{1.0, 0.0, -1.0, -(real[i] + real[i + 1]), real[i] * real[i + 1]};
    sections.push_back(s);
  }
  if (sections.size() != static_cast<std::size_t>(order)) {
    fail(ErrorCode::InternalConsistency, "butterworth pole pairing failed");
  }

  const double fc = fs_hz / pi * std::atan(w0 / k2);
  const cd z_inv = std::polar(1.0, -2.0 * pi * fc / fs_hz);
  for (auto& s : sections) {
    const double g = 1.0 / std::abs(biquad_response(s, z_inv));
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  return sections;
}

Biquad design_notch(double f0_hz, double q, double fs_hz) {
  check_rate(fs_hz);
  check_band_edge(f0_hz, fs_hz, "f0_hz");
  if (!(q > 0.0) || !std::isfinite(q)) fail(ErrorCode::InvalidParameter, "q must be positive");
  const double w0 = 2.0 * std::numbers::pi * f0_hz / fs_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double c = -2.0 * std::cos(w0);
  return Biquad{1.0 / a0, c / a0, 1.0 / a0, c / a0, (1.0 - alpha) / a0};
}

TimeSeries bandpass_filter(const TimeSeries& series, double low_hz, double high_hz, int order) {
  check_rate(series.sample_rate_hz);
  auto sections = design_butterworth_bandpass(low_hz, high_hz, order, series.sample_rate_hz);
  require_valid(series, "bandpass_filter input");
  SosFilter filter(std::move(sections));
  return TimeSeries{filter.apply(series.samples), series.sample_rate_hz, series.t0};
}

TimeSeries notch_filter(const TimeSeries& series, double f0_hz, double q) {
  check_rate(series.sample_rate_hz);
  const Biquad section = design_notch(f0_hz, q, series.sample_rate_hz);
  require_valid(series, "notch_filter input");
  SosFilter filter({section});
  return TimeSeries{filter.apply(series.samples), series.sample_rate_hz, series.t0};
}

// ---------------------------------------------------------------------------

std::size_t default_ssa_window(std::size_t n) {
  return std::max<std::size_t>(2, std::min<std::size_t>(n / 2, 128));
}

namespace {

struct Svd {
  std::size_t L = 0;
  std::size_t K = 0;
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
};

Svd trajectory_svd(const TimeSeries& series, std::size_t window_len) {
  require_valid(series, "ssa input");
  const std::size_t n = series.size();
  if (n < 3) fail(ErrorCode::InvalidParameter, "ssa needs at least 3 samples");
  if (window_len < 2 || window_len >= n) {
    fail(ErrorCode::InvalidParameter, "ssa window length must satisfy 1 < L < N, got L=" +
                                          std::to_string(window_len) +
                                          " N=" + std::to_string(n));
  }
  Svd out;
  out.L = window_len;
  out.K = n - window_len + 1;
  Eigen::MatrixXd x(out.L, out.K);
  for (std::size_t j = 0; j < out.K; ++j) {
    for (std::size_t i = 0; i < out.L; ++i) x(i, j) = series.samples[i + j];
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.u = svd.matrixU();
  out.s = svd.singularValues();
  out.v = svd.matrixV();
  return out;
}

// Diagonal averaging of sigma_i * U_i * V_i^T.
std::vector<double> hankelize(const Svd& svd, Eigen::Index i) {
  const std::size_t n = svd.L + svd.K - 1;
  std::vector<double> out(n, 0.0);
  const double sigma = svd.s(i);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= svd.K ? t - svd.K + 1 : 0;
    const std::size_t hi = std::min(svd.L - 1, t);
    double acc = 0.0;
    for (std::size_t l = lo; l <= hi; ++l) {
      acc += svd.u(static_cast<Eigen::Index>(l), i) *
             svd.v(static_cast<Eigen::Index>(t - l), i);
    }
    out[t] = sigma * acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace

SsaDecomposition ssa_decompose(const TimeSeries& series, std::size_t window_len) {
  const Svd svd = trajectory_svd(series, window_len);
  SsaDecomposition out;
  out.window_len = svd.L;
  out.original_len = series.size();
  const auto count = svd.s.size();
  out.singular_values.resize(static_cast<std::size_t>(count));
  out.components.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    out.singular_values[static_cast<std::size_t>(i)] = svd.s(i);
    out.components.push_back(hankelize(svd, i));
  }
  return out;
}

TimeSeries ssa_denoise(const TimeSeries& series, std::size_t window_len, std::size_t components) {
  if (components < 1) fail(ErrorCode::InvalidParameter, "ssa components must be >= 1");
  const Svd svd = trajectory_svd(series, window_len);
  if (components > static_cast<std::size_t>(svd.s.size())) {
    fail(ErrorCode::InvalidParameter, "ssa components (" + std::to_string(components) +
                                          ") exceed available eigentriples (" +
                                          std::to_string(svd.s.size()) + ")");
  }
  TimeSeries out{std::vector<double>(series.size(), 0.0), series.sample_rate_hz, series.t0};
  for (std::size_t i = 0; i < components; ++i) {
    const auto part = hankelize(svd, static_cast<Eigen::Index>(i));
    for (std::size_t t = 0; t < part.size(); ++t) out.samples[t] += part[t];
  }
  return out;
}

TimeSeries ssa_denoise(const TimeSeries& series) {
  return ssa_denoise(series, default_ssa_window(series.size()), 1);
}

}  // namespace emglabel::dsp
