#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "emglabel/ingest.hpp"
#include "emglabel/pipeline.hpp"

namespace emglabel::live {

struct LiveEvent {
  std::size_t buffer_rows = 0;  // rows buffered when the segment was announced
  matching::Segment segment;
};

/// Incremental form of the file-mode pipeline. Every `hop` rows the scan
/// channel is re-smoothed over a bounded tail of the buffer, only the new
/// distance-profile entries are computed, and minima detection plus
/// extraction run over the accumulated profile. A segment is announced as
/// soon as its scan window is complete, unless it overlaps an earlier
/// announcement of any action or its action already has expected_count
/// announcements. finish() returns exactly the file-mode result and announces
/// whatever final segments are still new.
class LiveSegmenter {
 public:
  explicit LiveSegmenter(pipeline::PipelineConfig config);

  void push(const ingest::MergedRecording& rows);
  std::vector<LiveEvent> take_events();
  pipeline::PipelineResult finish();

  std::size_t hop() const noexcept { return hop_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t rows() const noexcept { return buffer_.size(); }
  std::size_t evaluations() const noexcept { return evaluations_; }
  /// Rows re-smoothed per evaluation.
  std::size_t tail() const noexcept { return tail_; }

 private:
  void evaluate();
  void announce(const matching::Segment& s);

  pipeline::PipelineConfig config_;
  std::vector<matching::Template> templates_;
  std::vector<matching::DistanceProfile> profiles_;
  std::vector<double> stream_;  // latest smoothed value of every scan-channel row
  std::size_t tail_ = 0;
  std::size_t hop_ = 0;
  std::size_t window_ = 0;
  std::size_t min_rows_ = 0;
  std::size_t next_eval_ = 0;
  std::size_t evaluations_ = 0;
  ingest::MergedRecording buffer_;
  std::vector<matching::Segment> events_history_;
  std::vector<LiveEvent> events_;
};

std::size_t default_hop(const pipeline::PipelineConfig& config);

struct ListenStats {
  std::size_t packets = 0;
  std::size_t decoded = 0;
  std::size_t malformed = 0;
  std::size_t clamped = 0;
  std::size_t stale = 0;
  std::size_t dropped_prefix = 0;
  std::size_t emg_rows = 0;
  std::size_t merged_rows = 0;
};

struct ListenResult {
  pipeline::PipelineResult result;
  std::vector<LiveEvent> events;
  ListenStats stats;
};

using EventCallback = std::function<void(const LiveEvent&)>;

/// Binds config.live.bind:port for angle datagrams and streams EMG rows
/// (`t,ch1..ch5` CSV) from `emg_path`, paced by the t column divided by
/// `speed` (0 = unpaced). Returns once EMG is exhausted and no datagram has
/// arrived for config.live.linger_s seconds.
ListenResult listen_udp(const pipeline::PipelineConfig& config, const std::filesystem::path& emg_path,
                        double speed = 1.0, const EventCallback& on_event = {});

/// Replays a merged recording through a loopback socket: angle frames are
/// sent as datagrams to an ephemeral port while the EMG columns feed the
/// merger, both paced by `speed` (0 = unpaced).
ListenResult replay_udp(const ingest::MergedRecording& recording, const pipeline::PipelineConfig& config,
                        double speed = 0.0, const EventCallback& on_event = {});

std::string format_emg_stream(const ingest::MergedRecording& recording);

std::string format_listen_summary(const ListenResult& r);

}  // namespace emglabel::live
