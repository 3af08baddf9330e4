#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emglabel/ingest.hpp"
#include "emglabel/time_series.hpp"

namespace emglabel::matching {

enum class LocalCost { Absolute, Squared };

struct DtwOptions {
  LocalCost cost = LocalCost::Absolute;
  bool normalize = false;  // divide by warping path length
};

struct DtwResult {
  double cost = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (index in a, index in b)
};

/// Full dynamic program with backtracking. Moves are diagonal, up (advance a)
/// and left (advance b); ties prefer diagonal, then up, then left.
DtwResult dtw_align(std::span<const double> a, std::span<const double> b,
                    const DtwOptions& options = {});
DtwResult dtw_distance(const TimeSeries& a, const TimeSeries& b, const DtwOptions& options = {});

/// Cost only, two-row memory. Bit-identical to dtw_align(a, b).cost.
double dtw_cost(std::span<const double> a, std::span<const double> b,
                const DtwOptions& options = {});

struct SubsequenceMatch {
  std::size_t start = 0;  // [start, end) within b
  std::size_t end = 0;
  double cost = 0.0;
};

/// Best alignment of all of `a` against any contiguous stretch of `b`
/// (open-begin, open-end DTW).
SubsequenceMatch subsequence_match(std::span<const double> a, std::span<const double> b,
                                   const DtwOptions& options = {});

// ---------------------------------------------------------------------------

struct Template {
  std::string action_name;
  TimeSeries series;
  int expected_count = 1;
  std::optional<double> max_distance;
};

void validate_template(const Template& t);

struct DistanceProfile {
  std::vector<double> distances;
  std::vector<std::size_t> positions;
  std::size_t window_len = 0;
  std::size_t template_len = 0;

  std::size_t size() const noexcept { return distances.size(); }
};

struct ScanOptions {
  double window_factor = 2.0;
  DtwOptions dtw;
  unsigned threads = 0;  // 0 = hardware concurrency
};

std::size_t window_length(std::size_t template_len, double window_factor);

DistanceProfile mdtw_scan(const Template& tmpl, const TimeSeries& stream,
                          const ScanOptions& options = {});

// ---------------------------------------------------------------------------

/// Min-max scaling to [0,1]; a constant vector maps to all zeros.
std::vector<double> normalize_profile(std::span<const double> distances);

/// Interior minima of v[lo..hi] (flat runs report their middle index) whose
/// prominence within the section reaches `threshold`.
std::vector<std::size_t> prominent_minima(std::span<const double> v, std::size_t lo,
                                          std::size_t hi, double threshold);

/// Prominence of the minimum at index i over the whole vector, using the
/// same barrier rule as the detector. Flat neighbours are skipped first.
double minimum_prominence(std::span<const double> v, std::size_t i);

std::vector<std::size_t> detect_local_minima(std::span<const double> distances,
                                             double threshold = 0.5, int max_depth = 3);
std::vector<std::size_t> detect_local_minima(const DistanceProfile& profile,
                                             double threshold = 0.5, int max_depth = 3);

// ---------------------------------------------------------------------------

struct Segment {
  std::string action_name;
  std::size_t start_index = 0;  // [start_index, end_index)
  std::size_t end_index = 0;
  double dtw_distance = 0.0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ExtractOptions {
  // Candidate span for minimum i reaches at least one window past it, and
  // the last minimum gets its own window.
  bool extend_to_window = true;
  // Trim each span to its best subsequence match before scoring.
  bool refine = true;
  // Fewer minima raise InsufficientBoundaries. 1 is accepted only together
  // with extend_to_window.
  std::size_t min_minima = 2;
  // Refined spans shorter than this fraction of the template are dropped.
  double min_length_fraction = 0.5;
  DtwOptions dtw;
};

struct ExtractionResult {
  std::vector<Segment> segments;  // ascending dtw_distance, ties by start
  std::size_t candidates = 0;
  std::size_t discarded_by_length = 0;
  std::size_t discarded_by_distance = 0;
  std::size_t discarded_by_overlap = 0;
  bool short_of_expected = false;
  std::string diagnostic;
};

ExtractionResult extract_segments(const DistanceProfile& profile,
                                  std::span<const std::size_t> minima, const Template& tmpl,
                                  const TimeSeries& stream, const ExtractOptions& options = {});

// ---------------------------------------------------------------------------

struct LabeledSegment {
  std::string action_name;
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  double dtw_distance = 0.0;
  std::array<std::vector<double>, ingest::kEmgChannels> emg;
  std::array<std::vector<double>, ingest::kAngleChannels> angle_targets;

  friend bool operator==(const LabeledSegment&, const LabeledSegment&) = default;
};

struct DatasetTemplate {
  std::string action_name;
  std::vector<double> samples;
  int expected_count = 1;
  std::optional<double> max_distance;

  friend bool operator==(const DatasetTemplate&, const DatasetTemplate&) = default;
};

struct LabeledDataset {
  std::string config_hash;
  double sample_rate_hz = ingest::kMergedRateHz;
  std::vector<DatasetTemplate> templates;
  std::vector<LabeledSegment> entries;

  std::size_t size() const noexcept { return entries.size(); }
  void append(LabeledDataset&& other);

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

LabeledDataset label_segments(std::span<const Segment> segments,
                              const ingest::MergedRecording& recording,
                              std::string_view action_name, const Template* tmpl = nullptr,
                              std::string_view config_hash = {});

/// Line-delimited JSON: one header record, then one record per segment.
std::string format_dataset(const LabeledDataset& dataset);
LabeledDataset parse_dataset(std::string_view content);
void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset read_dataset(const std::filesystem::path& path);

/// `action,start_index,end_index,dtw_distance`
std::string format_segments(std::span<const Segment> segments);
std::vector<Segment> parse_segments(std::string_view content);

}  // namespace emglabel::matching
