#include "emglabel/features.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include "emglabel/error.hpp"
#include "emglabel/sampling.hpp"
#include "text.hpp"

namespace emglabel::features {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames{"mdf", "rms", "zcr", "wa", "psd",
                                                             "ssc", "sc",  "pdf", "se", "svd"};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

void require_segment(const TimeSeries& s) {
  require_valid(s, "feature segment");
  if (s.size() < kMinSegmentLength) {
    fail(ErrorCode::InvalidInput, "feature segment needs at least 16 samples, got " +
                                      std::to_string(s.size()));
  }
}

double rms(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double zcr(std::span<const double> x) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (x[i] * x[i + 1] < 0.0) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(x.size() - 1);
}

double willison(std::span<const double> x, double eps) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (std::abs(x[i + 1] - x[i]) > eps) ++count;
  }
  return static_cast<double>(count);
}

double slope_changes(std::span<const double> x, double eps) {
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if ((x[i] - x[i - 1]) * (x[i] - x[i + 1]) > eps) ++count;
  }
  return static_cast<double>(count);
}

double histogram_mode_mass(std::span<const double> x, std::size_t bins) {
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  const double lo = *mn;
  const double range = *mx - lo;
  if (!(range > 0.0)) return 1.0;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : x) {
    auto b = static_cast<std::size_t>((v - lo) / range * static_cast<double>(bins));
    counts[std::min(b, bins - 1)]++;
  }
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
         static_cast<double>(x.size());
}

double svd_entropy(std::span<const double> x, std::size_t order, std::size_t delay) {
  const std::size_t span = (order - 1) * delay;
  if (x.size() <= span) fail(ErrorCode::InvalidInput, "segment too short for svd entropy embedding");
  const std::size_t rows = x.size() - span;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(order));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < order; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x[r + c * delay];
    }
  }
  const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
  const double total = s.sum();
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double p = s(i) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(order));
}

struct Spectral {
  double mdf = 0.0, psd = 0.0, sc = 0.0, se = 0.0;
};

Spectral spectral(const TimeSeries& s) {
  const Periodogram p = periodogram(s);
  Spectral out;
  const double total = std::accumulate(p.power.begin(), p.power.end(), 0.0);
  out.psd = total / static_cast<double>(p.power.size());
  if (!(total > 0.0)) return out;
  double cum = 0.0;
  out.mdf = p.frequencies.back();
  for (std::size_t k = 0; k < p.power.size(); ++k) {
    cum += p.power[k];
    if (cum >= 0.5 * total) {
      out.mdf = p.frequencies[k];
      break;
    }
  }
  double weighted = 0.0;
  double h = 0.0;
  for (std::size_t k = 0; k < p.power.size(); ++k) {
    weighted += p.frequencies[k] * p.power[k];
    const double q = p.power[k] / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  out.sc = weighted / total;
  out.se = p.power.size() > 1 ? h / std::log(static_cast<double>(p.power.size())) : 0.0;
  return out;
}

double wa_eps(std::span<const double> x, const FeatureOptions& o) {
  return o.wa_threshold ? *o.wa_threshold : o.threshold_fraction * stddev(x);
}

double ssc_eps(std::span<const double> x, const FeatureOptions& o) {
  if (o.ssc_threshold) return *o.ssc_threshold;
  const double e = o.threshold_fraction * stddev(x);
  return e * e;
}

}  // namespace

std::string_view feature_name(FeatureId id) {
  const int k = static_cast<int>(id);
  if (k < 1 || k > kFeatureCount) fail(ErrorCode::InvalidParameter, "unknown feature id");
  return kNames[static_cast<std::size_t>(k - 1)];
}

std::optional<FeatureId> feature_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<FeatureId>(i + 1);
  }
  return std::nullopt;
}

const std::array<FeatureId, kFeatureCount>& all_features() {
  static const std::array<FeatureId, kFeatureCount> ids{
      FeatureId::Mdf, FeatureId::Rms, FeatureId::Zcr, FeatureId::Wa, FeatureId::Psd,
      FeatureId::Ssc, FeatureId::Sc,  FeatureId::Pdf, FeatureId::Se, FeatureId::Svd};
  return ids;
}

void validate_options(const FeatureOptions& o) {
  if (!(o.threshold_fraction >= 0.0) || !std::isfinite(o.threshold_fraction)) {
    fail(ErrorCode::InvalidParameter, "threshold_fraction must be >= 0");
  }
  if (o.wa_threshold && !(*o.wa_threshold >= 0.0)) {
    fail(ErrorCode::InvalidParameter, "wa_threshold must be >= 0");
  }
  if (o.ssc_threshold && !(*o.ssc_threshold >= 0.0)) {
    fail(ErrorCode::InvalidParameter, "ssc_threshold must be >= 0");
  }
  if (o.histogram_bins < 1) fail(ErrorCode::InvalidParameter, "histogram_bins must be >= 1");
  if (o.svd_order < 2) fail(ErrorCode::InvalidParameter, "svd_order must be >= 2");
  if (o.svd_delay < 1) fail(ErrorCode::InvalidParameter, "svd_delay must be >= 1");
  if ((o.svd_order - 1) * o.svd_delay >= kMinSegmentLength) {
    fail(ErrorCode::InvalidParameter, "svd embedding does not fit a minimum-length segment");
  }
}

Periodogram periodogram(const TimeSeries& s) {
  require_valid(s, "periodogram input");
  const std::size_t n = s.size();
  const std::size_t bins = n / 2 + 1;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  double wsum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                          static_cast<double>(n));
    in[k] = s.samples[k] * w;
    wsum += w * w;
  }
  fftw_execute(plan);
  Periodogram p;
  p.frequencies.resize(bins);
  p.power.resize(bins);
  const double scale = 1.0 / (s.sample_rate_hz * wsum);
  for (std::size_t k = 0; k < bins; ++k) {
    const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
    p.power[k] = (unpaired ? 1.0 : 2.0) * mag2 * scale;
    p.frequencies[k] = static_cast<double>(k) * s.sample_rate_hz / static_cast<double>(n);
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return p;
}

double compute_feature(const TimeSeries& segment, FeatureId id, const FeatureOptions& options) {
  require_segment(segment);
  validate_options(options);
  const auto x = segment.view();
  switch (id) {
    case FeatureId::Rms: return rms(x);
    case FeatureId::Zcr: return zcr(x);
    case FeatureId::Wa: return willison(x, wa_eps(x, options));
    case FeatureId::Ssc: return slope_changes(x, ssc_eps(x, options));
    case FeatureId::Pdf: return histogram_mode_mass(x, options.histogram_bins);
    case FeatureId::Svd: return svd_entropy(x, options.svd_order, options.svd_delay);
    case FeatureId::Mdf: return spectral(segment).mdf;
    case FeatureId::Psd: return spectral(segment).psd;
    case FeatureId::Sc: return spectral(segment).sc;
    case FeatureId::Se: return spectral(segment).se;
  }
  fail(ErrorCode::InvalidParameter, "unknown feature id");
}

std::array<double, kFeatureCount> compute_all_features(const TimeSeries& segment,
                                                       const FeatureOptions& options) {
  require_segment(segment);
  validate_options(options);
  const auto x = segment.view();
  const Spectral sp = spectral(segment);
  return {sp.mdf,
          rms(x),
          zcr(x),
          willison(x, wa_eps(x, options)),
          sp.psd,
          slope_changes(x, ssc_eps(x, options)),
          sp.sc,
          histogram_mode_mass(x, options.histogram_bins),
          sp.se,
          svd_entropy(x, options.svd_order, options.svd_delay)};
}

// ---------------------------------------------------------------------------

std::string FeatureMatrix::column_name(std::size_t column) const {
  return "ch" + std::to_string(channel_ids.at(column)) + "_" +
         std::string(feature_name(static_cast<FeatureId>(feature_ids.at(column))));
}

std::optional<std::size_t> FeatureMatrix::find_column(int channel, int feature) const {
  for (std::size_t j = 0; j < channel_ids.size(); ++j) {
    if (channel_ids[j] == channel && feature_ids[j] == feature) return j;
  }
  return std::nullopt;
}

std::vector<double> FeatureMatrix::column(std::size_t column) const {
  if (column >= column_count()) fail(ErrorCode::InvalidParameter, "column out of range");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[column]);
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.channel_ids = channel_ids;
  out.feature_ids = feature_ids;
  for (std::size_t i : indices) {
    if (i >= rows.size()) fail(ErrorCode::InvalidParameter, "row out of range");
    out.rows.push_back(rows[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> columns) const {
  FeatureMatrix out;
  out.labels = labels;
  for (std::size_t c : columns) {
    if (c >= column_count()) fail(ErrorCode::InvalidParameter, "column out of range");
    out.channel_ids.push_back(channel_ids[c]);
    out.feature_ids.push_back(feature_ids[c]);
  }
  for (const auto& r : rows) {
    std::vector<double> row;
    row.reserve(columns.size());
    for (std::size_t c : columns) row.push_back(r[c]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

FeatureMatrix empty_feature_matrix() {
  FeatureMatrix m;
  for (int ch = 1; ch <= kChannelCount; ++ch) {
    for (int f = 1; f <= kFeatureCount; ++f) {
      m.channel_ids.push_back(ch);
      m.feature_ids.push_back(f);
    }
  }
  return m;
}

FeatureMatrix extract_features(const matching::LabeledDataset& ds, const FeatureOptions& options,
                               unsigned threads) {
  validate_options(options);
  FeatureMatrix m = empty_feature_matrix();
  const std::size_t n = ds.entries.size();
  m.rows.assign(n, std::vector<double>(kChannelCount * kFeatureCount, 0.0));
  m.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.labels[i] = ds.entries[i].action_name;
    if (ds.entries[i].emg[0].size() < kMinSegmentLength) {
      fail(ErrorCode::InvalidInput, "segment " + std::to_string(i) + " is shorter than 16 samples");
    }
  }
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      try {
        for (std::size_t c = 0; c < static_cast<std::size_t>(kChannelCount); ++c) {
          const TimeSeries s{ds.entries[i].emg[c], ds.sample_rate_hz, 0.0};
          const auto f = compute_all_features(s, options);
          std::copy(f.begin(), f.end(), m.rows[i].begin() + static_cast<std::ptrdiff_t>(c * kFeatureCount));
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned t = threads != 0 ? threads : std::thread::hardware_concurrency();
  t = std::max(1u, std::min<unsigned>(t, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (t == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < t; ++k) pool.emplace_back(work, k, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!all_finite(m.rows[i])) {
      fail(ErrorCode::InvalidInput, "segment " + std::to_string(i) + " produced a non-finite feature");
    }
  }
  return m;
}

FeatureMatrix log_normalize(const FeatureMatrix& matrix) {
  FeatureMatrix out = matrix;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    for (std::size_t j = 0; j < out.rows[i].size(); ++j) {
      const double v = out.rows[i][j];
      if (!(v >= 0.0)) {
        fail(ErrorCode::Normalization, "row " + std::to_string(i) + ", channel " +
                                           std::to_string(out.channel_ids[j]) + ", feature " +
                                           std::string(feature_name(static_cast<FeatureId>(out.feature_ids[j]))) +
                                           ": value " + text::format_double(v) + " is negative");
      }
      out.rows[i][j] = std::log1p(v);
    }
  }
  return out;
}

std::string format_feature_matrix(const FeatureMatrix& m) {
  std::string out;
  for (std::size_t j = 0; j < m.column_count(); ++j) out += m.column_name(j) + ",";
  out += "label\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (double v : m.rows[i]) {
      text::append_double(out, v);
      out.push_back(',');
    }
    out += m.labels[i];
    out.push_back('\n');
  }
  return out;
}

FeatureMatrix parse_feature_matrix(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty()) fail(ErrorCode::Format, "line 1: missing feature header");
  const auto header = text::split(rows[0]);
  if (header.size() < 2 || text::trim(header.back()) != "label") {
    fail(ErrorCode::Format, "line 1: last column must be 'label'");
  }
  FeatureMatrix m;
  for (std::size_t j = 0; j + 1 < header.size(); ++j) {
    const auto name = text::trim(header[j]);
    const auto us = name.find('_');
    long long ch = 0;
    if (us != std::string_view::npos && name.starts_with("ch")) {
      ch = text::parse_int(name.substr(2, us - 2)).value_or(0);
    }
    const auto fid = us != std::string_view::npos ? feature_from_name(name.substr(us + 1)) : std::nullopt;
    if (ch < 1 || ch > kChannelCount || !fid) {
      fail(ErrorCode::Format, "line 1: bad feature column '" + std::string(name) + "'");
    }
    m.channel_ids.push_back(static_cast<int>(ch));
    m.feature_ids.push_back(static_cast<int>(*fid));
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i]);
    const std::string where = "line " + std::to_string(i + 1);
    if (f.size() != header.size()) fail(ErrorCode::Format, where + ": wrong field count");
    std::vector<double> row;
    for (std::size_t j = 0; j + 1 < f.size(); ++j) {
      const auto v = text::parse_double(f[j]);
      if (!v || !std::isfinite(*v)) fail(ErrorCode::Format, where + ": non-numeric feature value");
      row.push_back(*v);
    }
    m.rows.push_back(std::move(row));
    m.labels.emplace_back(text::trim(f.back()));
  }
  return m;
}

// ---------------------------------------------------------------------------

LdaResult lda_cv_accuracy(std::span<const double> values, std::span<const std::string> labels,
                          std::size_t folds, std::uint64_t seed) {
  if (values.size() != labels.size()) fail(ErrorCode::InvalidInput, "value/label count mismatch");
  const auto classes = distinct_labels(labels);
  if (classes.size() < 2) fail(ErrorCode::InvalidInput, "lda needs at least 2 classes");
  for (const auto& c : classes) {
    if (std::count(labels.begin(), labels.end(), c) < 4) {
      fail(ErrorCode::InvalidInput, "lda needs at least 4 rows of class '" + c + "'");
    }
  }
  if (!all_finite(values)) fail(ErrorCode::InvalidInput, "non-finite feature value");
  const double m_all = mean(values);
  double total_var = 0.0;
  for (double v : values) total_var += (v - m_all) * (v - m_all);
  if (!(total_var > 0.0)) return {0.5, true};

  std::vector<std::size_t> cls(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cls[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), labels[i]) -
                                      classes.begin());
  }
  const std::size_t k = classes.size();
  const auto fold_rows = stratified_folds(labels, folds, seed);
  std::vector<char> in_test(labels.size());
  std::size_t correct = 0;
  for (const auto& test : fold_rows) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (std::size_t i : test) in_test[i] = 1;
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (in_test[i]) continue;
      sum[cls[i]] += values[i];
      count[cls[i]]++;
    }
    std::vector<double> mu(k, 0.0);
    std::size_t n_train = 0;
    for (std::size_t c = 0; c < k; ++c) {
      mu[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0;
      n_train += count[c];
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!in_test[i]) ss += (values[i] - mu[cls[i]]) * (values[i] - mu[cls[i]]);
    }
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) present += count[c] > 0;
    const double var = n_train > present ? ss / static_cast<double>(n_train - present) : 0.0;
    for (std::size_t i : test) {
      const double x = values[i];
      std::size_t best = k;
      double best_score = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (count[c] == 0) continue;
        double score;
        if (var > 0.0) {
          const double prior = static_cast<double>(count[c]) / static_cast<double>(n_train);
          score = x * mu[c] / var - mu[c] * mu[c] / (2.0 * var) + std::log(prior);
        } else {
          score = -std::abs(x - mu[c]);
        }
        if (best == k || score > best_score) {
          best = c;
          best_score = score;
        }
      }
      if (best == cls[i]) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(values.size()), false};
}

std::vector<FeatureScore> lda_rank(const FeatureMatrix& m, int channel, std::size_t folds,
                                   std::uint64_t seed) {
  if (channel < 1 || channel > kChannelCount) fail(ErrorCode::InvalidParameter, "channel must be 1..5");
  std::vector<FeatureScore> out;
  for (FeatureId id : all_features()) {
    const auto col = m.find_column(channel, static_cast<int>(id));
    if (!col) continue;
    const auto r = lda_cv_accuracy(m.column(*col), m.labels, folds, seed);
    out.push_back({static_cast<int>(id), r.accuracy, r.degenerate});
  }
  if (out.empty()) fail(ErrorCode::InvalidInput, "matrix has no columns for the channel");
  std::stable_sort(out.begin(), out.end(), [](const FeatureScore& a, const FeatureScore& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    return a.feature_id < b.feature_id;
  });
  return out;
}

FeatureSelection select_top2(const std::array<std::vector<FeatureScore>, kChannelCount>& rankings) {
  FeatureSelection out;
  out.rankings = rankings;
  for (int ch = 1; ch <= kChannelCount; ++ch) {
    const auto& r = rankings[static_cast<std::size_t>(ch - 1)];
    if (r.size() < 2) fail(ErrorCode::InvalidInput, "channel ranking needs at least 2 features");
    out.chosen.emplace_back(ch, r[0].feature_id);
    out.chosen.emplace_back(ch, r[1].feature_id);
  }
  return out;
}

FeatureSelection rank_and_select(const FeatureMatrix& m, std::size_t folds, std::uint64_t seed) {
  std::array<std::vector<FeatureScore>, kChannelCount> rankings;
  for (int ch = 1; ch <= kChannelCount; ++ch) {
    rankings[static_cast<std::size_t>(ch - 1)] = lda_rank(m, ch, folds, seed);
  }
  return select_top2(rankings);
}

FeatureMatrix apply_selection(const FeatureMatrix& m, std::span<const std::pair<int, int>> chosen) {
  std::vector<std::size_t> cols;
  for (const auto& [ch, f] : chosen) {
    const auto c = m.find_column(ch, f);
    if (!c) {
      fail(ErrorCode::InvalidInput, "feature matrix lacks column ch" + std::to_string(ch) + "_" +
                                        std::string(feature_name(static_cast<FeatureId>(f))));
    }
    cols.push_back(*c);
  }
  return m.select_columns(cols);
}

FeatureMatrix apply_selection(const FeatureMatrix& m, const FeatureSelection& selection) {
  return apply_selection(m, selection.chosen);
}

}  // namespace emglabel::features
