#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emglabel/matching.hpp"
#include "emglabel/time_series.hpp"

namespace emglabel::features {

enum class FeatureId : int {
  Mdf = 1,
  Rms = 2,
  Zcr = 3,
  Wa = 4,
  Psd = 5,
  Ssc = 6,
  Sc = 7,
  Pdf = 8,
  Se = 9,
  Svd = 10,
};

inline constexpr int kFeatureCount = 10;
inline constexpr int kChannelCount = 5;
inline constexpr std::size_t kMinSegmentLength = 16;

std::string_view feature_name(FeatureId id);
std::optional<FeatureId> feature_from_name(std::string_view name);
const std::array<FeatureId, kFeatureCount>& all_features();

struct FeatureOptions {
  double threshold_fraction = 0.1;     // WA / SSC threshold as a fraction of the segment std
  std::optional<double> wa_threshold;  // absolute overrides
  std::optional<double> ssc_threshold;
  std::size_t histogram_bins = 32;
  std::size_t svd_order = 10;
  std::size_t svd_delay = 1;
};

void validate_options(const FeatureOptions& options);

struct Periodogram {
  std::vector<double> frequencies;
  std::vector<double> power;
};

/// One-sided Hann-windowed periodogram (density scaling).
Periodogram periodogram(const TimeSeries& series);

double compute_feature(const TimeSeries& segment, FeatureId id, const FeatureOptions& options = {});
std::array<double, kFeatureCount> compute_all_features(const TimeSeries& segment,
                                                       const FeatureOptions& options = {});

// ---------------------------------------------------------------------------

struct FeatureMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  std::vector<int> channel_ids;  // 1..5 per column
  std::vector<int> feature_ids;  // 1..10 per column

  std::size_t row_count() const noexcept { return rows.size(); }
  std::size_t column_count() const noexcept { return channel_ids.size(); }
  std::string column_name(std::size_t column) const;
  std::optional<std::size_t> find_column(int channel, int feature) const;
  std::vector<double> column(std::size_t column) const;
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  FeatureMatrix select_columns(std::span<const std::size_t> columns) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Full 50-column layout: column (ch-1)*10 + (fid-1).
FeatureMatrix empty_feature_matrix();

FeatureMatrix extract_features(const matching::LabeledDataset& dataset,
                               const FeatureOptions& options = {}, unsigned threads = 0);

/// ln(1 + v) per cell; negative cells raise Normalization.
FeatureMatrix log_normalize(const FeatureMatrix& matrix);

/// Header `ch<i>_<feature>,...,label`.
std::string format_feature_matrix(const FeatureMatrix& matrix);
FeatureMatrix parse_feature_matrix(std::string_view content);

// ---------------------------------------------------------------------------

struct FeatureScore {
  int feature_id = 0;
  double accuracy = 0.0;
  bool degenerate = false;

  friend bool operator==(const FeatureScore&, const FeatureScore&) = default;
};

struct LdaResult {
  double accuracy = 0.0;
  bool degenerate = false;
};

/// Pooled stratified k-fold accuracy of a single-feature LDA classifier.
LdaResult lda_cv_accuracy(std::span<const double> values, std::span<const std::string> labels,
                          std::size_t folds = 5, std::uint64_t seed = 0);

/// The 10 features of `channel` (1..5), best first, ties by feature id.
std::vector<FeatureScore> lda_rank(const FeatureMatrix& matrix, int channel, std::size_t folds = 5,
                                   std::uint64_t seed = 0);

struct FeatureSelection {
  std::array<std::vector<FeatureScore>, kChannelCount> rankings;
  std::vector<std::pair<int, int>> chosen;  // (channel, feature) in channel order

  friend bool operator==(const FeatureSelection&, const FeatureSelection&) = default;
};

FeatureSelection select_top2(const std::array<std::vector<FeatureScore>, kChannelCount>& rankings);

/// Ranks every channel and picks the top two of each.
FeatureSelection rank_and_select(const FeatureMatrix& matrix, std::size_t folds = 5,
                                 std::uint64_t seed = 0);

/// Reduced matrix holding the chosen columns in selection order.
FeatureMatrix apply_selection(const FeatureMatrix& matrix, const FeatureSelection& selection);
FeatureMatrix apply_selection(const FeatureMatrix& matrix,
                              std::span<const std::pair<int, int>> chosen);

}  // namespace emglabel::features
