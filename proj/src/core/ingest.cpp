#include "emglabel/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "emglabel/dsp.hpp"
#include "emglabel/error.hpp"
#include "emglabel/random.hpp"
#include "text.hpp"

namespace emglabel::ingest {

using kinematics::AngleFrame;

const std::array<std::string_view, 9>& recording_columns() {
  static const std::array<std::string_view, 9> cols{"t",  "ch1",      "ch2",   "ch3",  "ch4",
                                                    "ch5", "shoulder", "elbow", "wrist"};
  return cols;
}

std::string_view angle_channel_name(std::size_t channel) {
  static constexpr std::array<std::string_view, 3> names{"shoulder", "elbow", "wrist"};
  if (channel >= names.size()) fail(ErrorCode::InvalidParameter, "angle channel out of range");
  return names[channel];
}

std::optional<std::size_t> angle_channel_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kAngleChannels; ++i) {
    if (angle_channel_name(i) == name) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void MergedRecording::reserve(std::size_t n) {
  t.reserve(n);
  for (auto& c : emg) c.reserve(n);
  for (auto& c : angles) c.reserve(n);
}

void MergedRecording::push_row(double time, std::span<const double> emg_row,
                               std::span<const double> angle_row) {
  if (emg_row.size() != kEmgChannels || angle_row.size() != kAngleChannels) {
    fail(ErrorCode::InvalidInput, "row needs 5 emg and 3 angle values");
  }
  t.push_back(time);
  for (std::size_t c = 0; c < kEmgChannels; ++c) emg[c].push_back(emg_row[c]);
  for (std::size_t c = 0; c < kAngleChannels; ++c) angles[c].push_back(angle_row[c]);
}

TimeSeries MergedRecording::emg_series(std::size_t channel) const {
  if (channel >= kEmgChannels) fail(ErrorCode::InvalidParameter, "emg channel out of range");
  return TimeSeries{emg[channel], sample_rate_hz, t.empty() ? 0.0 : t.front()};
}

TimeSeries MergedRecording::angle_series(std::size_t channel) const {
  if (channel >= kAngleChannels) fail(ErrorCode::InvalidParameter, "angle channel out of range");
  return TimeSeries{angles[channel], sample_rate_hz, t.empty() ? 0.0 : t.front()};
}

MergedRecording MergedRecording::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) fail(ErrorCode::InvalidParameter, "slice out of range");
  MergedRecording out;
  out.sample_rate_hz = sample_rate_hz;
  const auto b = static_cast<std::ptrdiff_t>(begin);
  const auto e = static_cast<std::ptrdiff_t>(end);
  out.t.assign(t.begin() + b, t.begin() + e);
  for (std::size_t c = 0; c < kEmgChannels; ++c) out.emg[c].assign(emg[c].begin() + b, emg[c].begin() + e);
  for (std::size_t c = 0; c < kAngleChannels; ++c) {
    out.angles[c].assign(angles[c].begin() + b, angles[c].begin() + e);
  }
  return out;
}

void MergedRecording::validate() const {
  const std::size_t n = t.size();
  for (const auto& c : emg) {
    if (c.size() != n) fail(ErrorCode::Data, "emg column length mismatch");
    if (!all_finite(c)) fail(ErrorCode::Data, "non-finite emg value");
  }
  for (const auto& c : angles) {
    if (c.size() != n) fail(ErrorCode::Data, "angle column length mismatch");
    if (!all_finite(c)) fail(ErrorCode::Data, "non-finite angle value");
  }
  const double step = 1.0 / sample_rate_hz;
  for (std::size_t i = 1; i < n; ++i) {
    if (!(t[i] > t[i - 1])) {
      fail(ErrorCode::Data, "timestamp not increasing at row " + std::to_string(i));
    }
    if (std::abs((t[i] - t[i - 1]) - step) > 1e-6) {
      fail(ErrorCode::Data, "irregular sample spacing at row " + std::to_string(i));
    }
  }
}

MergedRecording parse_recording_text(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty()) fail(ErrorCode::Format, "line 1: missing header");
  const auto header = text::split(rows[0]);
  const auto& expected = recording_columns();
  std::array<std::size_t, 9> column_of{};
  std::array<bool, 9> seen{};
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = text::trim(header[i]);
    const auto it = std::find(expected.begin(), expected.end(), name);
    if (it == expected.end()) {
      fail(ErrorCode::Format, "line 1: unknown column '" + std::string(name) + "'");
    }
    const auto k = static_cast<std::size_t>(it - expected.begin());
    if (seen[k]) fail(ErrorCode::Format, "line 1: duplicate column '" + std::string(name) + "'");
    seen[k] = true;
    column_of[k] = i;
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (!seen[k]) {
      fail(ErrorCode::Format, "line 1: missing column '" + std::string(expected[k]) + "'");
    }
  }

  MergedRecording rec;
  rec.reserve(rows.size() - 1);
  std::array<double, 9> values{};
  for (std::size_t li = 1; li < rows.size(); ++li) {
    if (text::trim(rows[li]).empty()) continue;
    const auto fields = text::split(rows[li]);
    const std::string where = "line " + std::to_string(li + 1);
    if (fields.size() != header.size()) {
      fail(ErrorCode::Format, where + ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < 9; ++k) {
      const auto v = text::parse_double(fields[column_of[k]]);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorCode::Format, where + ": non-numeric value in column '" +
                                    std::string(expected[k]) + "'");
      }
      values[k] = *v;
    }
    const std::size_t row = rec.size();
    if (row > 0 && !(values[0] > rec.t.back())) {
      fail(ErrorCode::Data, "timestamp not increasing at row " + std::to_string(row));
    }
    rec.push_row(values[0], std::span<const double>(values.data() + 1, 5),
                 std::span<const double>(values.data() + 6, 3));
  }
  rec.validate();
  return rec;
}

MergedRecording parse_recording(const std::filesystem::path& path) {
  return parse_recording_text(text::read_file(path));
}

std::string format_recording(const MergedRecording& rec) {
  std::string out = "t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist\n";
  out.reserve(rec.size() * 120);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    text::append_double(out, rec.t[i]);
    for (const auto& c : rec.emg) {
      out.push_back(',');
      text::append_double(out, c[i]);
    }
    for (const auto& c : rec.angles) {
      out.push_back(',');
      text::append_double(out, c[i]);
    }
    out.push_back('\n');
  }
  return out;
}

void write_recording(const MergedRecording& recording, const std::filesystem::path& path) {
  text::write_file(path, format_recording(recording));
}

// ---------------------------------------------------------------------------

AnglePacket decode_angle_packet(std::string_view payload) {
  if (!payload.empty() && payload.back() == '\n') payload.remove_suffix(1);
  if (!payload.empty() && payload.back() == '\r') payload.remove_suffix(1);
  if (payload.find('\n') != std::string_view::npos) {
    fail(ErrorCode::PacketFormat, "packet holds more than one line");
  }
  const auto fields = text::split(payload);
  if (fields.size() != 4) {
    fail(ErrorCode::PacketFormat, "expected 4 fields, got " + std::to_string(fields.size()));
  }
  std::array<double, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto parsed = text::parse_double(fields[i]);
    if (!parsed || !std::isfinite(*parsed)) {
      fail(ErrorCode::PacketFormat, "field " + std::to_string(i + 1) + " is not a number");
    }
    v[i] = *parsed;
  }
  AnglePacket out;
  out.frame.t = v[0];
  double* angles[3] = {&out.frame.shoulder_deg, &out.frame.elbow_deg, &out.frame.wrist_deg};
  for (std::size_t i = 0; i < 3; ++i) {
    const double clamped = std::clamp(v[i + 1], 0.0, 180.0);
    if (clamped != v[i + 1]) out.clamped = true;
    *angles[i] = clamped;
  }
  return out;
}

std::string encode_angle_packet(const AngleFrame& f) {
  std::string out;
  text::append_double(out, f.t);
  for (double v : {f.shoulder_deg, f.elbow_deg, f.wrist_deg}) {
    out.push_back(',');
    text::append_double(out, v);
  }
  out.push_back('\n');
  return out;
}

// ---------------------------------------------------------------------------

StreamMerger::StreamMerger(MergeOptions options, double sample_rate_hz, double t0)
    : options_(options), rate_(sample_rate_hz), t0_(t0) {
  if (!(sample_rate_hz > 0.0)) fail(ErrorCode::InvalidParameter, "sample rate must be positive");
  if (!std::isfinite(options.clock_offset_s)) {
    fail(ErrorCode::InvalidParameter, "clock offset must be finite");
  }
  ready_.sample_rate_hz = sample_rate_hz;
}

void StreamMerger::push_emg(std::span<const double> row) {
  if (row.size() != kEmgChannels) fail(ErrorCode::InvalidInput, "emg row needs 5 values");
  std::array<double, kEmgChannels> r{};
  std::copy(row.begin(), row.end(), r.begin());
  pending_.push_back(r);
  ++next_index_;
  resolve(false);
}

bool StreamMerger::push_angle(const AngleFrame& frame) {
  AngleFrame f = frame;
  f.t += options_.clock_offset_s;
  if (!frames_.empty() && f.t < frames_.back().t) {
    ++stale_frames_;
    return false;
  }
  frames_.push_back(f);
  resolve(false);
  return true;
}

void StreamMerger::resolve(bool final) {
  while (!pending_.empty()) {
    const double ts = t0_ + static_cast<double>(pending_base_) / rate_;
    if (frames_.empty()) {
      if (final) fail(ErrorCode::Unmergeable, "no angle frames to merge with");
      return;
    }
    if (ts < frames_.front().t) {
      pending_.pop_front();
      ++pending_base_;
      ++dropped_prefix_;
      continue;
    }
    while (frame_cursor_ + 1 < frames_.size() && frames_[frame_cursor_ + 1].t <= ts) {
      ++frame_cursor_;
    }
    const bool has_next = frame_cursor_ + 1 < frames_.size();
    if (!has_next && !final) return;

    const AngleFrame& a = frames_[frame_cursor_];
    std::array<double, 3> angles{a.shoulder_deg, a.elbow_deg, a.wrist_deg};
    if (options_.alignment == Alignment::Linear && has_next && ts > a.t) {
      const AngleFrame& b = frames_[frame_cursor_ + 1];
      const double w = (ts - a.t) / (b.t - a.t);
      const std::array<double, 3> nb{b.shoulder_deg, b.elbow_deg, b.wrist_deg};
      for (std::size_t c = 0; c < 3; ++c) angles[c] += (nb[c] - angles[c]) * w;
    }
    ready_.push_row(ts, pending_.front(), angles);
    pending_.pop_front();
    ++pending_base_;
    ++emitted_;
  }
}

MergedRecording StreamMerger::take_rows() {
  MergedRecording out;
  out.sample_rate_hz = rate_;
  std::swap(out, ready_);
  ready_.sample_rate_hz = rate_;
  return out;
}

MergedRecording StreamMerger::finish() {
  resolve(true);
  return take_rows();
}

MergeResult merge_streams(std::span<const TimeSeries> emg, std::span<const AngleFrame> angles,
                          const MergeOptions& options) {
  if (emg.size() != kEmgChannels) fail(ErrorCode::InvalidInput, "merge needs 5 emg channels");
  for (std::size_t c = 0; c < emg.size(); ++c) {
    require_valid(emg[c], "emg channel");
    if (emg[c].size() != emg[0].size() || emg[c].sample_rate_hz != emg[0].sample_rate_hz ||
        emg[c].t0 != emg[0].t0) {
      fail(ErrorCode::InvalidInput, "emg channels differ in length, rate or start time");
    }
  }
  if (angles.empty()) fail(ErrorCode::Unmergeable, "angle stream is empty");
  for (std::size_t i = 1; i < angles.size(); ++i) {
    if (angles[i].t < angles[i - 1].t) {
      fail(ErrorCode::InvalidInput, "angle frames not time-sorted at " + std::to_string(i));
    }
  }
  StreamMerger merger(options, emg[0].sample_rate_hz, emg[0].t0);
  for (const auto& f : angles) merger.push_angle(f);
  std::array<double, kEmgChannels> row{};
  for (std::size_t i = 0; i < emg[0].size(); ++i) {
    for (std::size_t c = 0; c < kEmgChannels; ++c) row[c] = emg[c].samples[i];
    merger.push_emg(row);
  }
  MergeResult out;
  out.recording = merger.finish();
  out.dropped_prefix = merger.dropped_prefix();
  return out;
}

// ---------------------------------------------------------------------------

ActionProfile action_preset(std::string_view name) {
  ActionProfile p;
  p.name = std::string(name);
  if (name == "bicep_curl") {
    p.duration_s = 1.0;
    p.elbow_amplitude_deg = 110.0;
    p.shoulder_amplitude_deg = 25.0;
    p.wrist_amplitude_deg = 10.0;
    p.band_low_hz = 20.0;
    p.band_high_hz = 45.0;
    p.channel_gain = {1.0, 0.8, 0.3, 0.5, 0.2};
  } else if (name == "lateral_raise") {
    p.duration_s = 1.2;
    p.elbow_amplitude_deg = 40.0;
    p.shoulder_amplitude_deg = 80.0;
    p.wrist_amplitude_deg = 10.0;
    p.band_low_hz = 70.0;
    p.band_high_hz = 100.0;
    p.channel_gain = {0.4, 0.6, 1.0, 0.3, 0.7};
  } else if (name == "wrist_flex") {
    p.duration_s = 1.5;
    p.elbow_amplitude_deg = 20.0;
    p.shoulder_amplitude_deg = 5.0;
    p.wrist_amplitude_deg = 60.0;
    p.band_low_hz = 85.0;
    p.band_high_hz = 115.0;
    p.channel_gain = {0.2, 0.3, 0.4, 1.0, 0.9};
  } else {
    fail(ErrorCode::InvalidParameter, "unknown action preset '" + std::string(name) + "'");
  }
  return p;
}

std::vector<std::string> action_preset_names() {
  return {"bicep_curl", "lateral_raise", "wrist_flex"};
}

namespace {

double pulse_shape(std::size_t k, std::size_t n) {
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                               static_cast<double>(n - 1)));
}

std::size_t template_length(const ActionProfile& a, double fs) {
  return static_cast<std::size_t>(std::max(2.0, std::round(a.duration_s * fs)));
}

void validate_spec(const SyntheticSpec& s, const std::vector<ActionProfile>& actions) {
  auto bad = [](const std::string& m) { fail(ErrorCode::InvalidParameter, m); };
  if (s.repetitions < 1) bad("repetitions must be >= 1");
  if (!(s.sample_rate_hz > 0.0)) bad("sample rate must be positive");
  for (double v : {s.angle_noise_deg, s.emg_noise, s.burst_amplitude, s.heart_amplitude,
                   s.mains_amplitude, s.gap_min, s.lead_min}) {
    if (!(v >= 0.0) || !std::isfinite(v)) bad("noise, amplitude, gap and lead values must be >= 0");
  }
  if (!(s.duration_jitter >= 0.0 && s.duration_jitter < 1.0)) bad("duration jitter must be in [0,1)");
  if (!(s.amplitude_jitter >= 0.0 && s.amplitude_jitter < 1.0)) bad("amplitude jitter must be in [0,1)");
  if (!(s.gap_max >= s.gap_min) || !std::isfinite(s.gap_max)) bad("gap_max must be >= gap_min");
  if (!(s.lead_max >= s.lead_min) || !std::isfinite(s.lead_max)) bad("lead_max must be >= lead_min");
  if (!(s.heart_rate_hz > 0.0)) bad("heart rate must be positive");
  for (const auto& a : actions) {
    if (!(a.duration_s > 0.0)) bad("action duration must be positive");
    if (!(a.band_low_hz > 0.0 && a.band_low_hz < a.band_high_hz &&
          a.band_high_hz < s.sample_rate_hz / 2.0)) {
      bad("action burst band must lie inside (0, Nyquist)");
    }
  }
}

struct Placed {
  std::size_t action;
  std::size_t start;
  std::size_t len;
  double amp_factor;
};

}  // namespace

std::vector<double> elbow_pulse(std::size_t n, double amplitude) {
  if (n < 2) fail(ErrorCode::InvalidParameter, "pulse needs at least 2 samples");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = kRestElbowDeg - amplitude * pulse_shape(k, n);
  return out;
}

TimeSeries action_template(const ActionProfile& action, double sample_rate_hz) {
  return TimeSeries{elbow_pulse(template_length(action, sample_rate_hz), action.elbow_amplitude_deg),
                    sample_rate_hz, 0.0};
}

SyntheticRecording generate_synthetic(const SyntheticSpec& spec) {
  std::vector<ActionProfile> actions = spec.actions;
  if (actions.empty()) actions.push_back(action_preset("bicep_curl"));
  validate_spec(spec, actions);
  const double fs = spec.sample_rate_hz;
  Rng rng(spec.seed);

  std::vector<std::size_t> lengths;
  for (const auto& a : actions) lengths.push_back(template_length(a, fs));
  const std::size_t nmax = *std::max_element(lengths.begin(), lengths.end());

  std::vector<std::size_t> order;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    for (int r = 0; r < spec.repetitions; ++r) order.push_back(a);
  }
  rng.shuffle(order);

  auto rest_len = [&](double lo, double hi, std::size_t n) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * rng.uniform(lo, hi)));
  };

  std::vector<Placed> placed;
  std::size_t cursor = rest_len(spec.lead_min, spec.lead_max, nmax);
  for (std::size_t a : order) {
    const std::size_t n = lengths[a];
    const double d = rng.uniform(1.0 - spec.duration_jitter, 1.0 + spec.duration_jitter);
    const auto len = static_cast<std::size_t>(
        std::max<long long>(2, std::llround(static_cast<double>(n) * d)));
    const double amp = rng.uniform(1.0 - spec.amplitude_jitter, 1.0 + spec.amplitude_jitter);
    placed.push_back({a, cursor, len, amp});
    cursor += len + rest_len(spec.gap_min, spec.gap_max, n);
  }
  // The last gap is replaced by the tail rest.
  cursor = placed.back().start + placed.back().len;
  const std::size_t total = cursor + rest_len(spec.lead_min, spec.lead_max, nmax);

  SyntheticRecording out;
  MergedRecording& rec = out.recording;
  rec.sample_rate_hz = fs;
  rec.t.resize(total);
  for (std::size_t i = 0; i < total; ++i) rec.t[i] = static_cast<double>(i) / fs;
  rec.angles[kShoulder].assign(total, kRestShoulderDeg);
  rec.angles[kElbow].assign(total, kRestElbowDeg);
  rec.angles[kWrist].assign(total, kRestWristDeg);
  for (auto& c : rec.emg) c.assign(total, 0.0);

  for (const auto& p : placed) {
    const ActionProfile& a = actions[p.action];
    const auto elbow = elbow_pulse(p.len, a.elbow_amplitude_deg * p.amp_factor);
    for (std::size_t k = 0; k < p.len; ++k) {
      const double s = pulse_shape(k, p.len);
      rec.angles[kElbow][p.start + k] = elbow[k];
      rec.angles[kShoulder][p.start + k] = kRestShoulderDeg + a.shoulder_amplitude_deg * p.amp_factor * s;
      rec.angles[kWrist][p.start + k] = kRestWristDeg - a.wrist_amplitude_deg * p.amp_factor * s;
    }
  }
  const std::array<double, 3> noise{spec.angle_noise_deg, spec.angle_noise_deg,
                                    2.0 * spec.angle_noise_deg};
  for (std::size_t c = 0; c < kAngleChannels; ++c) {
    for (auto& v : rec.angles[c]) v = std::clamp(v + noise[c] * rng.normal(), 0.0, 180.0);
  }

  // EMG: noise floor, heartbeat spikes, optional mains hum, band-limited bursts.
  for (auto& c : rec.emg) {
    for (auto& v : c) v = spec.emg_noise * rng.normal();
  }
  const double period = 1.0 / spec.heart_rate_hz;
  const double phase = rng.uniform(0.0, period);
  const double beat_width = 0.015;
  const auto reach = static_cast<long long>(std::ceil(4.0 * beat_width * fs));
  for (double tb = phase; tb < static_cast<double>(total) / fs; tb += period) {
    const auto centre = static_cast<long long>(std::llround(tb * fs));
    for (long long i = std::max(0LL, centre - reach);
         i <= std::min(static_cast<long long>(total) - 1, centre + reach); ++i) {
      const double dt = static_cast<double>(i) / fs - tb;
      const double bump = spec.heart_amplitude * std::exp(-0.5 * dt * dt / (beat_width * beat_width));
      for (auto& c : rec.emg) c[static_cast<std::size_t>(i)] += bump;
    }
  }
  if (spec.mains_amplitude > 0.0) {
    const double mphase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < total; ++i) {
      const double hum = spec.mains_amplitude *
                         std::sin(2.0 * std::numbers::pi * spec.mains_hz * rec.t[i] + mphase);
      for (auto& c : rec.emg) c[i] += hum;
    }
  }
  const std::size_t warmup = 64;
  for (const auto& p : placed) {
    const ActionProfile& a = actions[p.action];
    const auto sections = dsp::design_butterworth_bandpass(a.band_low_hz, a.band_high_hz, 2, fs);
    const double norm = std::sqrt(2.0 * (a.band_high_hz - a.band_low_hz) / fs);
    for (std::size_t c = 0; c < kEmgChannels; ++c) {
      dsp::SosFilter filter(sections);
      std::vector<double> white(p.len + warmup);
      for (auto& v : white) v = rng.normal();
      const auto band = filter.apply(white);
      const double gain = spec.burst_amplitude * a.channel_gain[c] * p.amp_factor / norm;
      for (std::size_t k = 0; k < p.len; ++k) {
        rec.emg[c][p.start + k] += gain * pulse_shape(k, p.len) * band[warmup + k];
      }
    }
  }

  for (std::size_t a = 0; a < actions.size(); ++a) {
    SyntheticGroundTruth gt;
    gt.action_name = actions[a].name;
    gt.template_series = action_template(actions[a], fs);
    for (const auto& p : placed) {
      if (p.action == a) gt.occurrences.push_back({p.start, p.start + p.len});
    }
    out.truth.push_back(std::move(gt));
  }
  return out;
}

std::string format_ground_truth(std::span<const SyntheticGroundTruth> truth) {
  std::string out;
  for (const auto& gt : truth) {
    for (const auto& o : gt.occurrences) {
      out += gt.action_name + "," + std::to_string(o.start_index) + "," +
             std::to_string(o.end_index) + "\n";
    }
  }
  return out;
}

std::vector<std::pair<std::string, Occurrence>> parse_ground_truth(std::string_view content) {
  std::vector<std::pair<std::string, Occurrence>> out;
  const auto rows = text::lines(content);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i]);
    const auto s = f.size() == 3 ? text::parse_int(f[1]) : std::nullopt;
    const auto e = f.size() == 3 ? text::parse_int(f[2]) : std::nullopt;
    if (!s || !e || *s < 0 || *e <= *s) {
      fail(ErrorCode::Format, "ground truth line " + std::to_string(i + 1) + " is malformed");
    }
    out.emplace_back(std::string(text::trim(f[0])),
                     Occurrence{static_cast<std::size_t>(*s), static_cast<std::size_t>(*e)});
  }
  return out;
}

std::string format_template(const TimeSeries& series) {
  std::string out = "angle\n";
  for (double v : series.samples) {
    text::append_double(out, v);
    out.push_back('\n');
  }
  return out;
}

TimeSeries parse_template(std::string_view content, double sample_rate_hz) {
  const auto rows = text::lines(content);
  if (rows.empty() || text::trim(rows[0]) != "angle") {
    fail(ErrorCode::Format, "line 1: template header must be 'angle'");
  }
  TimeSeries out{{}, sample_rate_hz, 0.0};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto v = text::parse_double(rows[i]);
    if (!v || !std::isfinite(*v)) {
      fail(ErrorCode::Format, "line " + std::to_string(i + 1) + ": not a number");
    }
    out.samples.push_back(*v);
  }
  if (out.size() < 2) fail(ErrorCode::Format, "template needs at least 2 samples");
  return out;
}

}  // namespace emglabel::ingest
