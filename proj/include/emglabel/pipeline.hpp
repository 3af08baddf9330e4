#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emglabel/classify.hpp"
#include "emglabel/features.hpp"
#include "emglabel/ingest.hpp"
#include "emglabel/matching.hpp"

namespace emglabel::pipeline {

struct FilterConfig {
  bool enabled = true;
  double low_hz = 1.0;
  double high_hz = 120.0;
  int order = 2;
  bool notch_enabled = true;
  double notch_hz = 60.0;
  double notch_q = 30.0;
};

struct SsaConfig {
  bool enabled = true;
  std::optional<std::size_t> window;  // default min(N/2, 128)
  std::size_t components = 2;
};

struct MdtwConfig {
  double window_factor = 2.0;
  double threshold = 0.5;
  int max_depth = 3;
  matching::LocalCost local_cost = matching::LocalCost::Absolute;
  bool normalize = false;
  bool extend_to_window = true;
  bool refine = true;
  double min_length_fraction = 0.5;
  std::string channel = "elbow";
  unsigned threads = 0;
};

struct ActionConfig {
  std::string name;
  std::vector<double> template_samples;
  int expected_count = 1;
  std::optional<double> max_distance;
};

struct FeatureConfig {
  features::FeatureOptions options;
  bool log_normalize = true;
  std::size_t lda_folds = 5;
};

struct ClassifierConfig {
  classify::KernelType kernel = classify::KernelType::Rbf;
  double c = 1.0;
  std::optional<double> gamma;
  std::size_t folds = 5;
  double train_fraction = 0.8;
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
  bool standardize = true;
};

struct LiveConfig {
  std::string bind = "127.0.0.1";
  int port = 5005;
  std::optional<std::size_t> hop;  // default: half the shortest template
  double linger_s = 1.0;
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  FilterConfig filter;
  SsaConfig ssa;
  MdtwConfig mdtw;
  std::vector<ActionConfig> actions;
  FeatureConfig features;
  ClassifierConfig classifier;
  ingest::MergeOptions merge;
  LiveConfig live;
};

/// Throws Config naming the offending key.
void validate_config(const PipelineConfig& config);

/// Template paths are resolved against `base_dir`.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical JSON with templates inlined; parse_config(to_json(c)) == c.
std::string config_to_json(const PipelineConfig& config, int indent = 2);

/// Dotted key (`mdtw.threshold`, `actions.0.expected_count`); the value is a
/// JSON literal, or a plain string when it does not parse as one.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

/// 16 hex digits of FNV-1a over the compact canonical JSON.
std::string config_hash(const PipelineConfig& config);

matching::Template make_template(const ActionConfig& action);
std::size_t scan_channel(const PipelineConfig& config);

// ---------------------------------------------------------------------------

/// EMG: band-pass then notch. Angles: SSA reconstruction.
ingest::MergedRecording preprocess(const ingest::MergedRecording& raw, const PipelineConfig& config);

struct ActionReport {
  std::string action;
  bool ok = true;
  std::string stage;       // set on failure
  std::string error_code;  // set on failure
  std::string error;
  std::size_t profile_length = 0;
  std::size_t minima = 0;
  std::size_t candidates = 0;
  std::size_t segments = 0;
  std::size_t discarded_by_length = 0;
  std::size_t discarded_by_distance = 0;
  std::size_t discarded_by_overlap = 0;
  bool short_of_expected = false;
  std::string diagnostic;
  std::vector<double> distances;  // of the returned segments
};

struct ActionOutcome {
  ActionReport report;
  matching::DistanceProfile profile;
  std::vector<std::size_t> minima;
  std::vector<matching::Segment> segments;
};

/// One outcome per configured action, in config order. Failures are captured
/// in the report rather than thrown. `min_minima` is forwarded to extraction.
std::vector<ActionOutcome> segment_recording(const ingest::MergedRecording& preprocessed,
                                             const PipelineConfig& config, std::size_t min_minima = 2);

/// Labels segments per configured action (config order) on the preprocessed
/// recording. Segments naming an unknown action raise InvalidInput.
matching::LabeledDataset label_recording(std::span<const matching::Segment> segments,
                                         const ingest::MergedRecording& preprocessed,
                                         const PipelineConfig& config);

struct PipelineReport {
  std::string config_hash;
  std::size_t rows = 0;
  std::vector<ActionReport> actions;

  bool ok() const;
};

std::string format_report(const PipelineReport& report);

struct PipelineResult {
  ingest::MergedRecording preprocessed;
  std::vector<ActionOutcome> outcomes;
  std::vector<matching::Segment> segments;
  matching::LabeledDataset dataset;
  PipelineReport report;
};

/// preprocess -> segment_recording -> label_recording.
PipelineResult run_pipeline(const ingest::MergedRecording& raw, const PipelineConfig& config);
/// Same, starting from an already preprocessed recording.
PipelineResult run_pipeline_preprocessed(ingest::MergedRecording preprocessed,
                                         const PipelineConfig& config);

// ---------------------------------------------------------------------------

features::FeatureMatrix featurize(const matching::LabeledDataset& dataset,
                                  const PipelineConfig& config);

classify::SvmParams svm_params(const PipelineConfig& config);

struct TrainedModel {
  classify::SvmModel svm;
  features::FeatureSelection selection;
  classify::CvResult cv;
  double train_accuracy = 0.0;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t train_rows = 0;
  std::string config_hash;
};

/// Stratified split, LDA ranking and top-2 selection on the training side,
/// k-fold CV and the final fit on the training side.
TrainedModel train(const features::FeatureMatrix& matrix, const PipelineConfig& config);

struct EvaluationResult {
  double holdout_accuracy = 0.0;
  std::size_t eval_rows = 0;
  std::vector<std::string> truth;
  std::vector<std::string> predicted;
};

/// Scores the rows held out by the model's split.
EvaluationResult evaluate_holdout(const TrainedModel& model, const features::FeatureMatrix& matrix);

std::string format_trained_model(const TrainedModel& model);
TrainedModel parse_trained_model(std::string_view content);

std::string format_evaluation(const TrainedModel& model, const EvaluationResult& eval);

// ---------------------------------------------------------------------------

inline constexpr int kPlotDataVersion = 1;

/// Writes angles.csv, distance_<action>.csv, segments.csv, labeled.csv and
/// manifest.json into `out_dir`. Returns the written file names.
std::vector<std::string> write_plotdata(const ingest::MergedRecording& raw,
                                        const PipelineConfig& config,
                                        const std::filesystem::path& out_dir);

}  // namespace emglabel::pipeline
