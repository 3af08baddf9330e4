#include "emglabel/live.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "emglabel/dsp.hpp"
#include "emglabel/error.hpp"
#include "text.hpp"

namespace emglabel::live {

using ingest::MergedRecording;
using pipeline::PipelineConfig;
using pipeline::PipelineResult;
using Clock = std::chrono::steady_clock;

std::size_t default_hop(const PipelineConfig& config) {
  std::size_t shortest = 0;
  for (const auto& a : config.actions) {
    const auto n = pipeline::make_template(a).series.size();
    if (shortest == 0 || n < shortest) shortest = n;
  }
  return std::max<std::size_t>(1, shortest / 2);
}

LiveSegmenter::LiveSegmenter(PipelineConfig config) : config_(std::move(config)) {
  pipeline::validate_config(config_);
  hop_ = config_.live.hop.value_or(default_hop(config_));
  if (hop_ == 0) fail(ErrorCode::Config, "live.hop: must be positive");
  for (const auto& a : config_.actions) {
    templates_.push_back(pipeline::make_template(a));
    matching::DistanceProfile p;
    p.template_len = templates_.back().series.size();
    p.window_len = matching::window_length(p.template_len, config_.mdtw.window_factor);
    window_ = std::max(window_, p.window_len);
    profiles_.push_back(std::move(p));
  }
  tail_ = std::max<std::size_t>(4 * window_, 2 * hop_ + window_);
  if (config_.ssa.window) tail_ = std::max(tail_, 2 * *config_.ssa.window);
  min_rows_ = window_;
  next_eval_ = min_rows_;
  buffer_.sample_rate_hz = ingest::kMergedRateHz;
}

void LiveSegmenter::push(const MergedRecording& rows) {
  std::array<double, ingest::kEmgChannels> e{};
  std::array<double, ingest::kAngleChannels> a{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < e.size(); ++c) e[c] = rows.emg[c][i];
    for (std::size_t c = 0; c < a.size(); ++c) a[c] = rows.angles[c][i];
    buffer_.push_row(rows.t[i], e, a);
    if (buffer_.size() >= next_eval_) {
      evaluate();
      next_eval_ = buffer_.size() + hop_;
    }
  }
}

void LiveSegmenter::evaluate() {
  ++evaluations_;
  const std::size_t n = buffer_.size();
  const std::size_t begin = n > tail_ ? n - tail_ : 0;
  const auto& raw = buffer_.angles[pipeline::scan_channel(config_)];
  TimeSeries tail{std::vector<double>(raw.begin() + static_cast<long>(begin), raw.end()), buffer_.sample_rate_hz, 0.0};
  try {
    if (config_.ssa.enabled) {
      const std::size_t w = config_.ssa.window.value_or(dsp::default_ssa_window(tail.size()));
      tail = dsp::ssa_denoise(tail, w, config_.ssa.components);
    }
  } catch (const Error&) {
    return;
  }
  stream_.resize(n);
  std::copy(tail.samples.begin(), tail.samples.end(), stream_.begin() + static_cast<long>(begin));
  const TimeSeries stream{stream_, buffer_.sample_rate_hz, 0.0};

  const matching::DtwOptions dtw{config_.mdtw.local_cost, config_.mdtw.normalize};
  struct Candidate {
    double score;
    matching::Segment segment;
  };
  std::vector<Candidate> found;
  for (std::size_t k = 0; k < templates_.size(); ++k) {
    auto& prof = profiles_[k];
    const std::size_t w = prof.window_len;
    if (n < w) continue;
    const std::span<const double> a = templates_[k].series.samples;
    for (std::size_t p = prof.size(); p + w <= n; ++p) {
      prof.positions.push_back(p);
      prof.distances.push_back(matching::dtw_cost(a, std::span<const double>(stream_).subspan(p, w), dtw));
    }
    try {
      const auto minima = matching::detect_local_minima(prof, config_.mdtw.threshold, config_.mdtw.max_depth);
      if (minima.empty()) continue;
      matching::ExtractOptions ex;
      ex.extend_to_window = config_.mdtw.extend_to_window;
      ex.refine = config_.mdtw.refine;
      ex.min_minima = ex.extend_to_window ? 1 : 2;
      ex.min_length_fraction = config_.mdtw.min_length_fraction;
      ex.dtw = dtw;
      for (auto& s : matching::extract_segments(prof, minima, templates_[k], stream, ex).segments) {
        if (s.end_index + window_ > n + hop_) continue;
        found.push_back({s.dtw_distance / static_cast<double>(prof.template_len), std::move(s)});
      }
    } catch (const Error&) {
    }
  }
  std::stable_sort(found.begin(), found.end(), [](const Candidate& x, const Candidate& y) { return x.score < y.score; });
  for (const auto& c : found) announce(c.segment);
}

void LiveSegmenter::announce(const matching::Segment& s) {
  std::size_t same = 0;
  for (const auto& e : events_history_) {
    if (e.start_index < s.end_index && s.start_index < e.end_index) return;
    if (e.action_name == s.action_name) ++same;
  }
  for (const auto& a : config_.actions) {
    if (a.name == s.action_name && same >= static_cast<std::size_t>(a.expected_count)) return;
  }
  events_history_.push_back(s);
  events_.push_back({buffer_.size(), s});
}

std::vector<LiveEvent> LiveSegmenter::take_events() {
  std::vector<LiveEvent> out;
  out.swap(events_);
  return out;
}

PipelineResult LiveSegmenter::finish() {
  ++evaluations_;
  PipelineResult r = pipeline::run_pipeline(buffer_, config_);
  for (const auto& s : r.segments) announce(s);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

using EmgRow = std::pair<double, std::array<double, ingest::kEmgChannels>>;

std::vector<EmgRow> parse_emg_stream(std::string_view content) {
  const auto ls = text::lines(content);
  if (ls.empty() || text::trim(ls[0]) != "t,ch1,ch2,ch3,ch4,ch5") {
    fail(ErrorCode::Format, "emg stream: line 1: expected header t,ch1,ch2,ch3,ch4,ch5");
  }
  std::vector<EmgRow> rows;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (text::trim(ls[i]).empty()) continue;
    const auto f = text::split(ls[i], ',');
    const std::string where = "emg stream: line " + std::to_string(i + 1);
    if (f.size() != 6) fail(ErrorCode::Format, where + ": expected 6 fields");
    EmgRow r;
    const auto t = text::parse_double(f[0]);
    if (!t) fail(ErrorCode::Format, where + ": bad number");
    r.first = *t;
    for (std::size_t c = 0; c < 5; ++c) {
      const auto v = text::parse_double(f[c + 1]);
      if (!v) fail(ErrorCode::Format, where + ": bad number");
      r.second[c] = *v;
    }
    if (!rows.empty() && !(r.first > rows.back().first)) {
      fail(ErrorCode::Data, where + ": timestamp not increasing");
    }
    rows.push_back(r);
  }
  if (rows.empty()) fail(ErrorCode::InsufficientData, "emg stream is empty");
  return rows;
}

class Socket {
 public:
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  int fd() const { return fd_; }

 private:
  int fd_;
};

sockaddr_in make_addr(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    fail(ErrorCode::Config, "live.bind: not an IPv4 address: " + host);
  }
  return addr;
}

int bind_udp(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) fail(ErrorCode::Io, "cannot create UDP socket");
  const int rcvbuf = 4 << 20;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    fail(ErrorCode::Io, "cannot bind UDP " + host + ":" + std::to_string(port));
  }
  return fd;
}

int bound_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void pace(Clock::time_point start, double dt, double speed) {
  if (speed <= 0.0) return;
  std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                            std::chrono::duration<double>(dt / speed)));
}

struct Session {
  std::mutex mutex;
  ingest::StreamMerger merger;
  ListenStats stats;
  std::atomic<bool> stop{false};
  std::atomic<bool> emg_done{false};
  std::atomic<bool> sender_done{true};
  std::atomic<std::size_t> received{0};
  Clock::time_point last_activity = Clock::now();
  std::exception_ptr error;

  Session(const ingest::MergeOptions& o, double t0) : merger(o, ingest::kMergedRateHz, t0) {}

  void record_error() {
    std::lock_guard lock(mutex);
    if (!error) error = std::current_exception();
    stop = true;
  }
};

void receive_loop(Session& s, int fd) {
  try {
    char buf[512];
    while (!s.stop) {
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, 20) <= 0) continue;
      const auto n = ::recv(fd, buf, sizeof buf, 0);
      if (n < 0) continue;
      std::lock_guard lock(s.mutex);
      ++s.stats.packets;
      s.last_activity = Clock::now();
      try {
        const auto pkt = ingest::decode_angle_packet(std::string_view(buf, static_cast<std::size_t>(n)));
        ++s.stats.decoded;
        if (pkt.clamped) ++s.stats.clamped;
        s.merger.push_angle(pkt.frame);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::PacketFormat) throw;
        ++s.stats.malformed;
      }
      ++s.received;
    }
  } catch (...) {
    s.record_error();
  }
}

void emg_loop(Session& s, const std::vector<EmgRow>& rows, double speed, Clock::time_point start) {
  try {
    for (const auto& [t, row] : rows) {
      if (s.stop) return;
      pace(start, t - rows.front().first, speed);
      std::lock_guard lock(s.mutex);
      s.merger.push_emg(row);
      ++s.stats.emg_rows;
    }
    std::lock_guard lock(s.mutex);
    s.last_activity = Clock::now();
    s.emg_done = true;
  } catch (...) {
    s.record_error();
  }
}

ListenResult run_session(const PipelineConfig& config, int fd, const std::vector<EmgRow>& rows, double speed,
                         double linger_s, const EventCallback& on_event,
                         const std::function<void(Session&)>& sender) {
  if (!(speed >= 0.0)) fail(ErrorCode::InvalidParameter, "speed must be >= 0");
  LiveSegmenter seg(config);
  Session s(config.merge, rows.front().first);
  ListenResult out;
  const auto start = Clock::now();

  std::thread rx(receive_loop, std::ref(s), fd);
  std::thread emg(emg_loop, std::ref(s), std::cref(rows), speed, start);
  std::thread tx;
  if (sender) {
    s.sender_done = false;
    tx = std::thread([&] { sender(s); });
  }
  auto join_all = [&] {
    s.stop = true;
    if (tx.joinable()) tx.join();
    emg.join();
    rx.join();
  };

  const auto linger = std::chrono::duration<double>(linger_s);
  auto pump = [&](MergedRecording rows_in) {
    seg.push(rows_in);
    for (auto& e : seg.take_events()) {
      if (on_event) on_event(e);
      out.events.push_back(std::move(e));
    }
  };
  try {
    for (;;) {
      MergedRecording batch;
      bool done = false;
      {
        std::lock_guard lock(s.mutex);
        if (s.error) break;
        batch = s.merger.take_rows();
        done = s.emg_done && s.sender_done && Clock::now() - s.last_activity > linger;
      }
      if (batch.size() > 0) {
        pump(std::move(batch));
      } else if (done) {
        break;
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
    }
  } catch (...) {
    join_all();
    throw;
  }
  join_all();
  if (s.error) std::rethrow_exception(s.error);

  pump(s.merger.finish());
  out.result = seg.finish();
  for (auto& e : seg.take_events()) {
    if (on_event) on_event(e);
    out.events.push_back(std::move(e));
  }
  out.stats = s.stats;
  out.stats.stale = s.merger.stale_frames();
  out.stats.dropped_prefix = s.merger.dropped_prefix();
  out.stats.merged_rows = seg.rows();
  return out;
}

}  // namespace

ListenResult listen_udp(const PipelineConfig& config, const std::filesystem::path& emg_path, double speed,
                        const EventCallback& on_event) {
  pipeline::validate_config(config);
  const auto rows = parse_emg_stream(text::read_file(emg_path));
  Socket sock(bind_udp(config.live.bind, config.live.port));
  return run_session(config, sock.fd(), rows, speed, config.live.linger_s, on_event, {});
}

ListenResult replay_udp(const MergedRecording& recording, const PipelineConfig& config, double speed,
                        const EventCallback& on_event) {
  pipeline::validate_config(config);
  recording.validate();
  if (recording.empty()) fail(ErrorCode::InsufficientData, "recording is empty");
  std::vector<EmgRow> rows(recording.size());
  std::vector<std::string> packets(recording.size());
  for (std::size_t i = 0; i < recording.size(); ++i) {
    rows[i].first = recording.t[i];
    for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) rows[i].second[c] = recording.emg[c][i];
    packets[i] = ingest::encode_angle_packet({recording.t[i], recording.angles[ingest::kShoulder][i],
                                              recording.angles[ingest::kElbow][i],
                                              recording.angles[ingest::kWrist][i]});
  }
  Socket sock(bind_udp("127.0.0.1", 0));
  const int port = bound_port(sock.fd());
  Socket out_sock(::socket(AF_INET, SOCK_DGRAM, 0));
  if (out_sock.fd() < 0) fail(ErrorCode::Io, "cannot create UDP socket");
  const sockaddr_in dest = make_addr("127.0.0.1", port);

  const auto start = Clock::now();
  auto sender = [&](Session& s) {
    try {
      for (std::size_t i = 0; i < packets.size() && !s.stop; ++i) {
        pace(start, recording.t[i] - recording.t.front(), speed);
        while (!s.stop && i > s.received + 256) std::this_thread::sleep_for(std::chrono::microseconds(200));
        const auto n = ::sendto(out_sock.fd(), packets[i].data(), packets[i].size(), 0,
                                reinterpret_cast<const sockaddr*>(&dest), sizeof dest);
        if (n < 0) fail(ErrorCode::Io, "sendto failed");
      }
      while (!s.stop && s.received < packets.size()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
      std::lock_guard lock(s.mutex);
      s.last_activity = Clock::now();
      s.sender_done = true;
    } catch (...) {
      s.record_error();
    }
  };
  return run_session(config, sock.fd(), rows, speed, std::min(config.live.linger_s, 0.2), on_event, sender);
}

std::string format_emg_stream(const MergedRecording& recording) {
  std::string s = "t,ch1,ch2,ch3,ch4,ch5\n";
  for (std::size_t i = 0; i < recording.size(); ++i) {
    text::append_double(s, recording.t[i]);
    for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) {
      s.push_back(',');
      text::append_double(s, recording.emg[c][i]);
    }
    s.push_back('\n');
  }
  return s;
}

std::string format_listen_summary(const ListenResult& r) {
  nlohmann::ordered_json j;
  j["packets"] = r.stats.packets;
  j["decoded"] = r.stats.decoded;
  j["malformed"] = r.stats.malformed;
  j["clamped"] = r.stats.clamped;
  j["stale"] = r.stats.stale;
  j["dropped_prefix"] = r.stats.dropped_prefix;
  j["emg_rows"] = r.stats.emg_rows;
  j["merged_rows"] = r.stats.merged_rows;
  j["events"] = r.events.size();
  j["segments"] = r.result.segments.size();
  return j.dump() + "\n";
}

}  // namespace emglabel::live
