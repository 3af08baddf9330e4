#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emglabel/kinematics.hpp"
#include "emglabel/time_series.hpp"

namespace emglabel::ingest {

inline constexpr std::size_t kEmgChannels = 5;
inline constexpr std::size_t kAngleChannels = 3;
inline constexpr double kMergedRateHz = 256.0;

enum AngleChannel : std::size_t { kShoulder = 0, kElbow = 1, kWrist = 2 };

/// `t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist`
const std::array<std::string_view, 9>& recording_columns();
std::string_view angle_channel_name(std::size_t channel);
std::optional<std::size_t> angle_channel_from_name(std::string_view name);

// Column-oriented 8-channel stream on the 256 Hz base.
struct MergedRecording {
  std::vector<double> t;
  std::array<std::vector<double>, kEmgChannels> emg;
  std::array<std::vector<double>, kAngleChannels> angles;
  double sample_rate_hz = kMergedRateHz;

  std::size_t size() const noexcept { return t.size(); }
  bool empty() const noexcept { return t.empty(); }

  void reserve(std::size_t n);
  void push_row(double time, std::span<const double> emg_row, std::span<const double> angle_row);

  TimeSeries emg_series(std::size_t channel) const;
  TimeSeries angle_series(std::size_t channel) const;

  /// Rows [begin, end) as a new recording.
  MergedRecording slice(std::size_t begin, std::size_t end) const;

  /// Throws Data on column length mismatch, non-finite values or timestamps
  /// that are not strictly increasing with spacing 1/rate (+-1e-6 s).
  void validate() const;
};

MergedRecording parse_recording(const std::filesystem::path& path);
MergedRecording parse_recording_text(std::string_view text);
std::string format_recording(const MergedRecording& recording);
void write_recording(const MergedRecording& recording, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Angle datagrams: one ASCII line `ts,shoulder,elbow,wrist\n` per packet.

struct AnglePacket {
  kinematics::AngleFrame frame;
  bool clamped = false;
};

AnglePacket decode_angle_packet(std::string_view payload);
std::string encode_angle_packet(const kinematics::AngleFrame& frame);

// ---------------------------------------------------------------------------
// Stream merge

enum class Alignment { Hold, Linear };

struct MergeOptions {
  Alignment alignment = Alignment::Hold;
  double clock_offset_s = 0.0;  // added to every angle timestamp
};

struct MergeResult {
  MergedRecording recording;
  std::size_t dropped_prefix = 0;
};

MergeResult merge_streams(std::span<const TimeSeries> emg,
                          std::span<const kinematics::AngleFrame> angles,
                          const MergeOptions& options = {});

// Incremental form of merge_streams for the live path. A row is released once
// an angle frame later than its timestamp has arrived (or on finish), so the
// concatenated output equals merge_streams over the same inputs.
class StreamMerger {
 public:
  explicit StreamMerger(MergeOptions options = {}, double sample_rate_hz = kMergedRateHz,
                        double t0 = 0.0);

  void push_emg(std::span<const double> row);
  /// Returns false and counts the frame as stale when it is older than the
  /// latest accepted frame.
  bool push_angle(const kinematics::AngleFrame& frame);

  /// Rows resolved since the last call.
  MergedRecording take_rows();
  /// Resolves everything still pending.
  MergedRecording finish();

  std::size_t dropped_prefix() const noexcept { return dropped_prefix_; }
  std::size_t stale_frames() const noexcept { return stale_frames_; }
  std::size_t emitted_rows() const noexcept { return emitted_; }

 private:
  void resolve(bool final);

  MergeOptions options_;
  double rate_;
  double t0_;
  std::size_t next_index_ = 0;
  std::deque<std::array<double, kEmgChannels>> pending_;
  std::size_t pending_base_ = 0;
  std::vector<kinematics::AngleFrame> frames_;
  std::size_t frame_cursor_ = 0;
  MergedRecording ready_;
  std::size_t dropped_prefix_ = 0;
  std::size_t stale_frames_ = 0;
  std::size_t emitted_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic recordings

struct ActionProfile {
  std::string name;
  double duration_s = 1.0;
  double elbow_amplitude_deg = 110.0;
  double shoulder_amplitude_deg = 25.0;
  double wrist_amplitude_deg = 10.0;
  double band_low_hz = 20.0;
  double band_high_hz = 45.0;
  std::array<double, kEmgChannels> channel_gain{1.0, 1.0, 1.0, 1.0, 1.0};
};

/// bicep_curl, lateral_raise, wrist_flex.
ActionProfile action_preset(std::string_view name);
std::vector<std::string> action_preset_names();

inline constexpr double kRestShoulderDeg = 10.0;
inline constexpr double kRestElbowDeg = 170.0;
inline constexpr double kRestWristDeg = 175.0;

struct SyntheticSpec {
  std::vector<ActionProfile> actions;  // empty means {bicep_curl}
  int repetitions = 8;                 // per action
  double angle_noise_deg = 3.0;        // wrist gets twice this
  double duration_jitter = 0.2;
  double amplitude_jitter = 0.3;
  double gap_min = 0.4;  // rest between repetitions, in template lengths
  double gap_max = 2.0;
  double lead_min = 2.0;  // rest before the first / after the last repetition
  double lead_max = 2.5;
  double emg_noise = 0.05;
  double burst_amplitude = 1.0;
  double heart_amplitude = 0.3;
  double heart_rate_hz = 1.2;
  double mains_amplitude = 0.0;
  double mains_hz = 60.0;
  double sample_rate_hz = kMergedRateHz;
  std::uint64_t seed = 7;
};

struct Occurrence {
  std::size_t start_index = 0;
  std::size_t end_index = 0;

  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

struct SyntheticGroundTruth {
  std::string action_name;
  std::vector<Occurrence> occurrences;
  TimeSeries template_series;
};

struct SyntheticRecording {
  MergedRecording recording;
  std::vector<SyntheticGroundTruth> truth;
};

/// Raised-cosine elbow excursion `rest - amplitude * (1 - cos(2 pi k/(n-1))) / 2`.
std::vector<double> elbow_pulse(std::size_t n, double amplitude);
TimeSeries action_template(const ActionProfile& action, double sample_rate_hz = kMergedRateHz);

SyntheticRecording generate_synthetic(const SyntheticSpec& spec);

/// Lines `action,start_index,end_index`.
std::string format_ground_truth(std::span<const SyntheticGroundTruth> truth);
std::vector<std::pair<std::string, Occurrence>> parse_ground_truth(std::string_view text);

/// Single-column template CSV with header `angle`.
std::string format_template(const TimeSeries& series);
TimeSeries parse_template(std::string_view text, double sample_rate_hz = kMergedRateHz);

}  // namespace emglabel::ingest
