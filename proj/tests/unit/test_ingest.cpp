#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "emglabel/error.hpp"
#include "emglabel/ingest.hpp"
#include "emglabel/random.hpp"
#include "text.hpp"

using namespace emglabel;
using namespace emglabel::ingest;

namespace {

template <typename F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(ErrorCode::InternalConsistency, "unreachable");
}

std::string row(double t, double v) {
  std::string s;
  text::append_double(s, t);
  for (int k = 0; k < 8; ++k) {
    s.push_back(',');
    text::append_double(s, v + k);
  }
  return s + "\n";
}

std::array<TimeSeries, kEmgChannels> emg_block(std::size_t n, Rng& rng, double t0 = 0.0) {
  std::array<TimeSeries, kEmgChannels> emg;
  for (auto& c : emg) {
    c.t0 = t0;
    for (std::size_t i = 0; i < n; ++i) c.samples.push_back(rng.normal());
  }
  return emg;
}

kinematics::AngleFrame frame(double t, double elbow) { return {t, 10.0, elbow, 170.0}; }

}  // namespace

TEST_SUITE("recording csv") {
  TEST_CASE("well-formed three rows") {
    const std::string csv = "t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist\n" + row(0.0, 1) + row(1.0 / 256, 2) +
                            row(2.0 / 256, 3);
    const auto rec = parse_recording_text(csv);
    CHECK(rec.size() == 3);
    CHECK(rec.emg[0][1] == 2.0);
    CHECK(rec.angles[kElbow][2] == 3.0 + 6);
    CHECK(format_recording(rec) == csv);
  }

  TEST_CASE("columns may come in any order") {
    const std::string csv = "elbow,t,ch1,ch2,ch3,ch4,ch5,shoulder,wrist\n9,0,1,2,3,4,5,6,7\n";
    const auto rec = parse_recording_text(csv);
    CHECK(rec.angles[kElbow][0] == 9.0);
    CHECK(rec.angles[kWrist][0] == 7.0);
  }

  TEST_CASE("missing elbow column names it") {
    const auto e = error_of([] { parse_recording_text("t,ch1,ch2,ch3,ch4,ch5,shoulder,wrist\n0,1,2,3,4,5,6,7\n"); });
    CHECK(e.code() == ErrorCode::Format);
    CHECK(std::string(e.what()).find("'elbow'") != std::string::npos);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  TEST_CASE("backwards timestamp is a data error at that row") {
    const std::string csv = "t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist\n" + row(0.0, 1) + row(1.0 / 256, 2) +
                            row(0.5 / 256, 3);
    const auto e = error_of([&] { parse_recording_text(csv); });
    CHECK(e.code() == ErrorCode::Data);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  TEST_CASE("non-numeric field reports its line") {
    const std::string csv = "t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist\n" + row(0.0, 1) + "0.00390625,x,1,1,1,1,1,1,1\n";
    const auto e = error_of([&] { parse_recording_text(csv); });
    CHECK(e.code() == ErrorCode::Format);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  TEST_CASE("irregular spacing and unknown columns") {
    const std::string csv = "t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist\n" + row(0.0, 1) + row(0.1, 2);
    CHECK(error_of([&] { parse_recording_text(csv); }).code() == ErrorCode::Data);
    CHECK(error_of([] { parse_recording_text("t,ch1,ch2,ch3,ch4,ch5,shoulder,elbow,wrist,knee\n"); }).code() ==
          ErrorCode::Format);
  }

  TEST_CASE("file round trip is exact") {
    SyntheticSpec spec;
    spec.repetitions = 2;
    const auto syn = generate_synthetic(spec);
    const auto path = std::filesystem::temp_directory_path() / "emglabel_ingest_rt.csv";
    write_recording(syn.recording, path);
    const auto back = parse_recording(path);
    std::filesystem::remove(path);
    CHECK(back.t == syn.recording.t);
    CHECK(back.emg == syn.recording.emg);
    CHECK(back.angles == syn.recording.angles);
    CHECK(error_of([&] { parse_recording(path); }).code() == ErrorCode::Io);
  }
}

TEST_SUITE("angle packets") {
  TEST_CASE("decode examples") {
    const auto p = decode_angle_packet("12.500,10.0,95.5,170.0\n");
    CHECK(p.frame == kinematics::AngleFrame{12.5, 10.0, 95.5, 170.0});
    CHECK_FALSE(p.clamped);
    CHECK(error_of([] { decode_angle_packet("12.5,10.0,95.5\n"); }).code() == ErrorCode::PacketFormat);
    const auto c = decode_angle_packet("12.5,10,200,50\n");
    CHECK(c.frame.elbow_deg == 180.0);
    CHECK(c.frame.wrist_deg == 50.0);
    CHECK(c.clamped);
    CHECK(error_of([] { decode_angle_packet("12.5,a,1,2\n"); }).code() == ErrorCode::PacketFormat);
    CHECK(error_of([] { decode_angle_packet(""); }).code() == ErrorCode::PacketFormat);
    CHECK(decode_angle_packet("1,2,3,-4\r\n").frame.wrist_deg == 0.0);
  }

  TEST_CASE("decode encode decode round trip on random in-range frames") {
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
      const kinematics::AngleFrame f{rng.uniform(0, 1e5), rng.uniform(0, 180), rng.uniform(0, 180),
                                     rng.uniform(0, 180)};
      const auto text1 = encode_angle_packet(f);
      CHECK(text1.back() == '\n');
      const auto once = decode_angle_packet(text1);
      CHECK(once.frame == f);
      CHECK(decode_angle_packet(encode_angle_packet(once.frame)).frame == once.frame);
    }
  }
}

TEST_SUITE("merge") {
  TEST_CASE("zero-order hold") {
    Rng rng(1);
    const auto emg = emg_block(256, rng);
    const kinematics::AngleFrame frames[] = {frame(0.0, 90.0), frame(0.5, 120.0)};
    const auto r = merge_streams(emg, frames);
    REQUIRE(r.recording.size() == 256);
    CHECK(r.dropped_prefix == 0);
    for (std::size_t i = 0; i < 256; ++i) {
      CHECK(r.recording.angles[kElbow][i] == (i < 128 ? 90.0 : 120.0));
    }
  }

  TEST_CASE("prefix before the first frame is dropped") {
    Rng rng(2);
    const auto emg = emg_block(256, rng);
    const kinematics::AngleFrame frames[] = {frame(0.25, 90.0), frame(0.5, 120.0)};
    const auto r = merge_streams(emg, frames);
    CHECK(r.dropped_prefix == 64);
    CHECK(r.recording.size() == 192);
    CHECK(r.recording.t.front() == 0.25);
  }

  TEST_CASE("linear interpolation") {
    Rng rng(3);
    const auto emg = emg_block(256, rng);
    const kinematics::AngleFrame frames[] = {frame(0.0, 90.0), frame(0.5, 120.0)};
    const auto r = merge_streams(emg, frames, {Alignment::Linear, 0.0});
    CHECK(r.recording.angles[kElbow][64] == doctest::Approx(105.0).epsilon(1e-12));
    CHECK(r.recording.angles[kElbow][200] == 120.0);
  }

  TEST_CASE("empty angle stream and clock offset") {
    Rng rng(4);
    const auto emg = emg_block(16, rng);
    CHECK(error_of([&] { merge_streams(emg, std::span<const kinematics::AngleFrame>{}); }).code() ==
          ErrorCode::Unmergeable);
    const kinematics::AngleFrame frames[] = {frame(0.0, 90.0)};
    const auto r = merge_streams(emg, frames, {Alignment::Hold, 8.0 / 256});
    CHECK(r.dropped_prefix == 8);
  }

  TEST_CASE("EMG values and timestamps are preserved on random streams") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 1 + rng.index(800);
      const double t0 = rng.uniform(0, 100);
      const auto emg = emg_block(n, rng, t0);
      std::vector<kinematics::AngleFrame> frames;
      double t = t0 + rng.uniform(-0.2, 0.5);
      while (t < t0 + static_cast<double>(n) / 256 + 0.1) {
        frames.push_back(frame(t, rng.uniform(0, 180)));
        t += rng.uniform(0.02, 0.05);
      }
      const auto r = merge_streams(emg, frames, {rng.index(2) ? Alignment::Hold : Alignment::Linear, 0.0});
      REQUIRE(r.recording.size() + r.dropped_prefix == n);
      for (std::size_t i = 0; i < r.recording.size(); ++i) {
        const std::size_t src = i + r.dropped_prefix;
        CHECK(r.recording.t[i] == emg[0].time_at(src));
        for (std::size_t c = 0; c < kEmgChannels; ++c) CHECK(r.recording.emg[c][i] == emg[c].samples[src]);
      }
    }
  }

  TEST_CASE("streaming merger resolves incrementally and counts stale frames") {
    StreamMerger m;
    const double row5[5] = {1, 2, 3, 4, 5};
    CHECK(m.push_angle(frame(0.0, 50.0)));
    for (int i = 0; i < 10; ++i) m.push_emg(row5);
    CHECK(m.take_rows().size() == 0);
    CHECK(m.push_angle(frame(5.0 / 256, 60.0)));
    CHECK(m.take_rows().size() == 5);
    CHECK_FALSE(m.push_angle(frame(1.0 / 256, 70.0)));
    CHECK(m.stale_frames() == 1);
    const auto rest = m.finish();
    CHECK(rest.size() == 5);
    CHECK(rest.angles[kElbow][0] == 60.0);
    CHECK(m.emitted_rows() == 10);

    StreamMerger none;
    none.push_emg(row5);
    CHECK(error_of([&] { none.finish(); }).code() == ErrorCode::Unmergeable);
  }
}

TEST_SUITE("synthetic") {
  TEST_CASE("eight disjoint occurrences") {
    SyntheticSpec spec;
    spec.repetitions = 8;
    spec.seed = 7;
    const auto syn = generate_synthetic(spec);
    REQUIRE(syn.truth.size() == 1);
    const auto& occ = syn.truth[0].occurrences;
    CHECK(occ.size() == 8);
    for (std::size_t k = 0; k < occ.size(); ++k) {
      CHECK(occ[k].start_index < occ[k].end_index);
      CHECK(occ[k].end_index <= syn.recording.size());
      if (k > 0) CHECK(occ[k].start_index >= occ[k - 1].end_index);
    }
    syn.recording.validate();
  }

  TEST_CASE("deterministic under seed") {
    SyntheticSpec spec;
    spec.actions = {action_preset("bicep_curl"), action_preset("wrist_flex")};
    spec.repetitions = 3;
    spec.mains_amplitude = 0.2;
    const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
    CHECK(format_recording(a.recording) == format_recording(b.recording));
    CHECK(format_ground_truth(a.truth) == format_ground_truth(b.truth));
    spec.seed = 8;
    CHECK(format_recording(generate_synthetic(spec).recording) != format_recording(a.recording));
  }

  TEST_CASE("noise-free elbow equals the template at each occurrence") {
    SyntheticSpec spec;
    spec.angle_noise_deg = 0.0;
    spec.duration_jitter = 0.0;
    spec.amplitude_jitter = 0.0;
    const auto syn = generate_synthetic(spec);
    const auto& tmpl = syn.truth[0].template_series.samples;
    for (const auto& o : syn.truth[0].occurrences) {
      REQUIRE(o.end_index - o.start_index == tmpl.size());
      for (std::size_t k = 0; k < tmpl.size(); ++k) {
        CHECK(syn.recording.angles[kElbow][o.start_index + k] == tmpl[k]);
      }
    }
  }

  TEST_CASE("ground truth and template files round trip") {
    SyntheticSpec spec;
    spec.actions = {action_preset("bicep_curl"), action_preset("lateral_raise")};
    spec.repetitions = 2;
    const auto syn = generate_synthetic(spec);
    const auto parsed = parse_ground_truth(format_ground_truth(syn.truth));
    REQUIRE(parsed.size() == 4);
    CHECK(parsed[2].first == "lateral_raise");
    CHECK(parsed[2].second == syn.truth[1].occurrences[0]);
    const auto t = parse_template(format_template(syn.truth[0].template_series));
    CHECK(t.samples == syn.truth[0].template_series.samples);
    CHECK(error_of([] { parse_ground_truth("a,5,2\n"); }).code() == ErrorCode::Format);
    CHECK(error_of([] { parse_template("angle\n1\n"); }).code() == ErrorCode::Format);
  }

  TEST_CASE("parameter validation") {
    SyntheticSpec spec;
    spec.repetitions = 0;
    CHECK(error_of([&] { generate_synthetic(spec); }).code() == ErrorCode::InvalidParameter);
    CHECK(error_of([] { action_preset("squat"); }).code() == ErrorCode::InvalidParameter);
    CHECK(action_preset_names().size() == 3);
  }
}
