#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "emglabel/dsp.hpp"
#include "emglabel/error.hpp"
#include "emglabel/ingest.hpp"
#include "emglabel/matching.hpp"
#include "emglabel/random.hpp"
#include "oracles.hpp"

using namespace emglabel;
using namespace emglabel::matching;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

TimeSeries series(std::vector<double> v) { return TimeSeries{std::move(v), 256.0, 0.0}; }

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -3, double hi = 3) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Prominence straight from the definition: for each side take the highest
// value between i and the nearest strictly lower sample (or the vector end).
double prominence_oracle(const std::vector<double>& v, std::size_t i) {
  std::size_t a = i, b = i;
  while (a > 0 && v[a - 1] == v[i]) --a;
  while (b + 1 < v.size() && v[b + 1] == v[i]) ++b;
  if (a == 0 || b + 1 == v.size() || v[a - 1] < v[i] || v[b + 1] < v[i]) return 0.0;
  std::size_t l = a;
  while (l > 0 && v[l - 1] >= v[i]) --l;
  std::size_t r = b;
  while (r + 1 < v.size() && v[r + 1] >= v[i]) ++r;
  const double left = *std::max_element(v.begin() + static_cast<long>(l), v.begin() + static_cast<long>(a) + 1);
  const double right = *std::max_element(v.begin() + static_cast<long>(b), v.begin() + static_cast<long>(r) + 1);
  return std::min(left, right) - v[i];
}

struct Planted {
  ingest::SyntheticRecording syn;
  Template tmpl;
  TimeSeries stream;
  DistanceProfile profile;
  std::vector<std::size_t> minima;
};

const Planted& planted() {
  static const Planted p = [] {
    Planted out;
    ingest::SyntheticSpec spec;
    spec.repetitions = 8;
    spec.seed = 11;
    out.syn = ingest::generate_synthetic(spec);
    out.tmpl = Template{"bicep_curl", out.syn.truth[0].template_series, 8, std::nullopt};
    const auto elbow = out.syn.recording.angle_series(ingest::kElbow);
    out.stream = dsp::ssa_denoise(elbow, dsp::default_ssa_window(elbow.size()), 2);
    out.profile = mdtw_scan(out.tmpl, out.stream);
    out.minima = detect_local_minima(out.profile);
    return out;
  }();
  return p;
}

}  // namespace

TEST_SUITE("dtw") {
  TEST_CASE("examples") {
    const std::vector<double> a{1, 2, 3};
    const auto same = dtw_align(a, a);
    CHECK(same.cost == 0.0);
    CHECK(same.path == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}, {2, 2}});

    const std::vector<double> b{1, 2, 2, 3};
    CHECK(dtw_align(a, b).cost == 0.0);
    CHECK(oracle::brute_force_dtw(a, b) == 0.0);

    const std::vector<double> z{0, 0}, o{1, 1};
    CHECK(dtw_align(z, o).cost == 2.0);
    CHECK(oracle::brute_force_dtw(z, o) == 2.0);
  }

  TEST_CASE("path is a monotone connected walk from corner to corner") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
      const auto a = random_vec(rng, 1 + rng.index(30)), b = random_vec(rng, 1 + rng.index(30));
      const auto r = dtw_align(a, b);
      REQUIRE(!r.path.empty());
      CHECK(r.path.front() == std::pair<std::size_t, std::size_t>{0, 0});
      CHECK(r.path.back() == std::pair<std::size_t, std::size_t>{a.size() - 1, b.size() - 1});
      double sum = 0.0;
      for (std::size_t k = 0; k < r.path.size(); ++k) {
        sum += std::abs(a[r.path[k].first] - b[r.path[k].second]);
        if (k == 0) continue;
        const auto di = r.path[k].first - r.path[k - 1].first;
        const auto dj = r.path[k].second - r.path[k - 1].second;
        CHECK(di <= 1);
        CHECK(dj <= 1);
        CHECK(di + dj >= 1);
      }
      CHECK(sum == doctest::Approx(r.cost).epsilon(1e-12));
    }
  }

  TEST_CASE("errors and options") {
    const std::vector<double> a{1, 2}, empty;
    CHECK(code_of([&] { dtw_align(a, empty); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { dtw_cost(empty, a); }) == ErrorCode::InvalidInput);
    const std::vector<double> b{0, 0};
    CHECK(dtw_align(a, b, {LocalCost::Squared, false}).cost == 5.0);
    CHECK(dtw_align(a, b, {LocalCost::Absolute, true}).cost == 1.5);
  }

  TEST_CASE("equals the brute-force minimum over all warping paths") {
    CHECK(oracle::count_paths(3, 3) == 13);
    Rng rng(5);
    for (int t = 0; t < 400; ++t) {
      const auto a = random_vec(rng, 1 + rng.index(6)), b = random_vec(rng, 1 + rng.index(6));
      const double ref = oracle::brute_force_dtw(a, b);
      CHECK(dtw_align(a, b).cost == doctest::Approx(ref).epsilon(1e-12));
      CHECK(dtw_cost(a, b) == dtw_align(a, b).cost);
    }
  }

  TEST_CASE("identity, symmetry, non-negativity and the diagonal bound") {
    Rng rng(9);
    for (int t = 0; t < 300; ++t) {
      const std::size_t n = 1 + rng.index(40);
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, rng.index(2) ? n : 1 + rng.index(40));
      CHECK(dtw_cost(a, a) == 0.0);
      const double ab = dtw_cost(a, b);
      CHECK(ab == dtw_cost(b, a));
      CHECK(ab >= 0.0);
      if (a.size() == b.size()) {
        double diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) diag += std::abs(a[i] - b[i]);
        CHECK(ab <= diag);
      }
    }
  }

  TEST_CASE("subsequence match finds an exact embedding") {
    Rng rng(13);
    for (int t = 0; t < 50; ++t) {
      const auto a = random_vec(rng, 2 + rng.index(12), 10, 20);
      auto b = random_vec(rng, 5 + rng.index(30), -20, -10);
      const std::size_t at = rng.index(b.size());
      b.insert(b.begin() + static_cast<long>(at), a.begin(), a.end());
      const auto m = subsequence_match(a, b);
      CHECK(m.cost == 0.0);
      CHECK(m.start == at);
      CHECK(m.end == at + a.size());
    }
  }
}

TEST_SUITE("mdtw scan") {
  TEST_CASE("padded template: the profile bottoms out at the embedding") {
    const auto pulse = ingest::elbow_pulse(60, 100.0);
    const std::size_t left = 4;  // below n/10
    std::vector<double> s(left, pulse.front());
    s.insert(s.end(), pulse.begin(), pulse.end());
    s.insert(s.end(), 150, pulse.back());
    const Template t{"p", series(pulse), 1, std::nullopt};
    const auto prof = mdtw_scan(t, series(s));
    CHECK(prof.window_len == 120);
    CHECK(prof.size() == s.size() - 120 + 1);
    const auto best = static_cast<std::size_t>(
        std::min_element(prof.distances.begin(), prof.distances.end()) - prof.distances.begin());
    CHECK(prof.positions[best] + 6 >= left);
    CHECK(prof.positions[best] <= left + 6);
    for (std::size_t p = 0; p <= left; ++p) CHECK(prof.distances[p] == 0.0);
    CHECK(prof.distances.back() > 0.0);
  }

  TEST_CASE("small profile agrees with path enumeration") {
    const std::vector<double> tmpl{0.0, 2.0, 3.0};
    std::vector<double> s{0, 0, 0, 2, 3, 3, 1, 0, 2.5, 3};
    const auto prof = mdtw_scan({"x", series(tmpl), 1, std::nullopt}, series(s));
    REQUIRE(prof.size() == s.size() - 6 + 1);
    for (std::size_t p = 0; p < prof.size(); ++p) {
      const std::span<const double> win(s.data() + p, 6);
      CHECK(prof.distances[p] == doctest::Approx(oracle::brute_force_dtw(tmpl, win)).epsilon(1e-12));
    }
  }

  TEST_CASE("length contract and constants") {
    const Template t{"c", series({5, 5, 5}), 1, std::nullopt};
    const auto one = mdtw_scan(t, series(std::vector<double>(6, 5.0)));
    CHECK(one.size() == 1);
    CHECK(one.positions[0] == 0);
    const auto flat = mdtw_scan(t, series(std::vector<double>(50, 5.0)));
    CHECK(std::all_of(flat.distances.begin(), flat.distances.end(), [](double d) { return d == 0.0; }));
    CHECK(code_of([&] { mdtw_scan(t, series(std::vector<double>(5, 5.0))); }) == ErrorCode::InsufficientData);
    CHECK(code_of([&] { mdtw_scan({"c", series({1}), 1, std::nullopt}, series({1, 2, 3})); }) ==
          ErrorCode::InvalidParameter);
  }

  TEST_CASE("random windows recompute bit-exactly, with and without threads") {
    Rng rng(21);
    for (int t = 0; t < 10; ++t) {
      const Template tm{"r", series(random_vec(rng, 2 + rng.index(20))), 1, std::nullopt};
      const auto s = random_vec(rng, 200 + rng.index(300));
      ScanOptions one;
      one.threads = 1;
      ScanOptions many;
      many.threads = 4;
      const auto a = mdtw_scan(tm, series(s), one);
      const auto b = mdtw_scan(tm, series(s), many);
      CHECK(a.distances == b.distances);
      CHECK(a.size() == s.size() - a.window_len + 1);
      for (int k = 0; k < 20; ++k) {
        const std::size_t p = rng.index(a.size());
        CHECK(a.positions[p] == p);
        CHECK(a.distances[p] == dtw_align(tm.series.samples, std::span<const double>(s).subspan(p, a.window_len)).cost);
        CHECK(a.distances[p] >= 0.0);
      }
    }
  }
}

TEST_SUITE("local minima") {
  TEST_CASE("examples") {
    CHECK(detect_local_minima(std::vector<double>{1, 0, 1, 0, 1}) == std::vector<std::size_t>{1, 3});
    CHECK(detect_local_minima(std::vector<double>{1, 2, 3, 4, 5}).empty());
    CHECK(detect_local_minima(std::vector<double>{3, 3, 3}).empty());
    CHECK(detect_local_minima(std::vector<double>{7}).empty());
  }

  TEST_CASE("deep valley first, shallow valley at depth three") {
    const std::vector<double> v{0.9, 0.0, 1.0, 0.95, 0.8, 1.0, 1.0};
    CHECK(prominence_oracle(v, 1) == doctest::Approx(0.9));
    CHECK(prominence_oracle(v, 4) == doctest::Approx(0.2));
    CHECK(minimum_prominence(v, 1) == doctest::Approx(prominence_oracle(v, 1)));
    CHECK(minimum_prominence(v, 4) == doctest::Approx(prominence_oracle(v, 4)));
    CHECK(detect_local_minima(v, 0.5, 1) == std::vector<std::size_t>{1});
    CHECK(detect_local_minima(v, 0.5, 2) == std::vector<std::size_t>{1});
    CHECK(detect_local_minima(v, 0.5, 3) == std::vector<std::size_t>{1, 4});
  }

  TEST_CASE("normalization is global and scale free") {
    const std::vector<double> v{0.9, 0.0, 1.0, 0.95, 0.8, 1.0, 1.0};
    std::vector<double> w;
    for (double x : v) w.push_back(40.0 + 250.0 * x);
    CHECK(detect_local_minima(w) == detect_local_minima(v));
    CHECK(normalize_profile(std::vector<double>{2, 4, 3}) == std::vector<double>{0, 1, 0.5});
    CHECK(normalize_profile(std::vector<double>{2, 2}) == std::vector<double>{0, 0});
  }

  TEST_CASE("parameter errors") {
    const std::vector<double> v{1, 0, 1};
    CHECK(code_of([&] { detect_local_minima(v, 0.0); }) == ErrorCode::InvalidParameter);
    CHECK(code_of([&] { detect_local_minima(v, 1.5); }) == ErrorCode::InvalidParameter);
    CHECK(code_of([&] { detect_local_minima(v, 0.5, 0); }) == ErrorCode::InvalidParameter);
    CHECK(code_of([&] { detect_local_minima(std::vector<double>{}); }) == ErrorCode::InvalidInput);
  }

  TEST_CASE("sorted, unique and prominent enough on random profiles") {
    Rng rng(31);
    for (int t = 0; t < 500; ++t) {
      const std::size_t n = 1 + rng.index(120);
      std::vector<double> v(n);
      const bool quantized = rng.index(2) == 0;
      double x = 0.0;
      for (auto& e : v) {
        x += rng.normal();
        e = quantized ? std::round(x) : x;
      }
      const double threshold = rng.uniform(0.05, 1.0);
      const int depth = 1 + static_cast<int>(rng.index(4));
      const auto m = detect_local_minima(v, threshold, depth);
      CHECK(std::is_sorted(m.begin(), m.end()));
      CHECK(std::set<std::size_t>(m.begin(), m.end()).size() == m.size());
      const auto norm = normalize_profile(v);
      const double floor = threshold / std::pow(2.0, depth - 1);
      for (auto i : m) {
        REQUIRE(i < n);
        CHECK(prominence_oracle(norm, i) >= floor - 1e-12);
      }
    }
  }
}

TEST_SUITE("extraction") {
  TEST_CASE("eight planted pulses are recovered") {
    const auto& p = planted();
    const auto r = extract_segments(p.profile, p.minima, p.tmpl, p.stream);
    REQUIRE(r.segments.size() == 8);
    CHECK_FALSE(r.short_of_expected);
    CHECK(std::is_sorted(r.segments.begin(), r.segments.end(),
                         [](const Segment& a, const Segment& b) { return a.dtw_distance < b.dtw_distance; }));
    const double tol = 0.1 * static_cast<double>(p.tmpl.series.size());
    auto found = r.segments;
    std::sort(found.begin(), found.end(), [](const Segment& a, const Segment& b) { return a.start_index < b.start_index; });
    const auto& truth = p.syn.truth[0].occurrences;
    for (std::size_t k = 0; k < 8; ++k) {
      CHECK(std::abs(static_cast<double>(found[k].start_index) - static_cast<double>(truth[k].start_index)) <= tol);
      CHECK(std::abs(static_cast<double>(found[k].end_index) - static_cast<double>(truth[k].end_index)) <= tol);
      const std::span<const double> seg(p.stream.samples.data() + found[k].start_index,
                                        found[k].end_index - found[k].start_index);
      CHECK(found[k].dtw_distance == dtw_align(p.tmpl.series.samples, seg).cost);
    }
  }

  TEST_CASE("expected_count 2 keeps the two best scores") {
    const auto& p = planted();
    const auto all = extract_segments(p.profile, p.minima, p.tmpl, p.stream);
    auto two = p.tmpl;
    two.expected_count = 2;
    const auto r = extract_segments(p.profile, p.minima, two, p.stream);
    REQUIRE(r.segments.size() == 2);
    std::vector<double> scores;
    for (const auto& s : all.segments) scores.push_back(s.dtw_distance);
    std::sort(scores.begin(), scores.end());
    CHECK(r.segments[0].dtw_distance == scores[0]);
    CHECK(r.segments[1].dtw_distance == scores[1]);
    CHECK(r.segments[0] == all.segments[0]);
    CHECK(r.segments[1] == all.segments[1]);
  }

  TEST_CASE("max_distance 0 leaves nothing, with a diagnostic") {
    const auto& p = planted();
    auto strict = p.tmpl;
    strict.max_distance = 0.0;
    const auto r = extract_segments(p.profile, p.minima, strict, p.stream);
    CHECK(r.segments.empty());
    CHECK(r.short_of_expected);
    CHECK_FALSE(r.diagnostic.empty());
    CHECK(r.discarded_by_distance == r.candidates);
  }

  TEST_CASE("length never exceeds expected_count") {
    const auto& p = planted();
    for (int want = 1; want <= 12; ++want) {
      auto t = p.tmpl;
      t.expected_count = want;
      const auto r = extract_segments(p.profile, p.minima, t, p.stream);
      CHECK(r.segments.size() <= static_cast<std::size_t>(want));
      CHECK(r.short_of_expected == (r.segments.size() < static_cast<std::size_t>(want)));
    }
  }

  TEST_CASE("too few boundaries") {
    const auto& p = planted();
    const std::vector<std::size_t> one{p.minima.front()};
    ExtractOptions bounded;
    bounded.extend_to_window = false;
    CHECK(code_of([&] { extract_segments(p.profile, one, p.tmpl, p.stream, bounded); }) ==
          ErrorCode::InsufficientBoundaries);
    CHECK(code_of([&] { extract_segments(p.profile, one, p.tmpl, p.stream); }) == ErrorCode::InsufficientBoundaries);
    ExtractOptions live;
    live.min_minima = 1;
    CHECK(extract_segments(p.profile, one, p.tmpl, p.stream, live).segments.size() == 1);
    CHECK(code_of([&] { extract_segments(p.profile, std::vector<std::size_t>{}, p.tmpl, p.stream, live); }) ==
          ErrorCode::InsufficientBoundaries);
  }

  TEST_CASE("plain adjacent-minima spans") {
    const auto& p = planted();
    ExtractOptions plain;
    plain.extend_to_window = false;
    plain.refine = false;
    auto t = p.tmpl;
    t.expected_count = 100;
    const auto r = extract_segments(p.profile, p.minima, t, p.stream, plain);
    CHECK(r.candidates == p.minima.size() - 1);
    for (const auto& s : r.segments) {
      const auto it = std::find_if(p.minima.begin(), p.minima.end(),
                                   [&](std::size_t m) { return p.profile.positions[m] == s.start_index; });
      REQUIRE(it != p.minima.end());
      REQUIRE(it + 1 != p.minima.end());
      CHECK(s.end_index == p.profile.positions[*(it + 1)]);
    }
  }
}

TEST_SUITE("labeling and files") {
  TEST_CASE("one segment copies eight slices") {
    const auto& p = planted();
    const std::vector<Segment> segs{{"bicep_curl", 100, 612, 1.5}};
    const auto d = label_segments(segs, p.syn.recording, "bicep_curl", &p.tmpl, "abc");
    REQUIRE(d.size() == 1);
    const auto& e = d.entries[0];
    for (const auto& c : e.emg) CHECK(c.size() == 512);
    for (const auto& c : e.angle_targets) CHECK(c.size() == 512);
    for (std::size_t i = 0; i < 512; ++i) {
      CHECK(e.angle_targets[ingest::kElbow][i] == p.syn.recording.angles[ingest::kElbow][100 + i]);
      CHECK(e.emg[4][i] == p.syn.recording.emg[4][100 + i]);
    }
    CHECK(d.config_hash == "abc");
    REQUIRE(d.templates.size() == 1);
    CHECK(d.templates[0].samples == p.tmpl.series.samples);
    CHECK(parse_dataset(format_dataset(d)) == d);
  }

  TEST_CASE("empty dataset is still a valid file") {
    const auto& p = planted();
    const auto d = label_segments(std::vector<Segment>{}, p.syn.recording, "bicep_curl");
    CHECK(d.size() == 0);
    const auto text = format_dataset(d);
    CHECK_FALSE(text.empty());
    CHECK(parse_dataset(text) == d);
  }

  TEST_CASE("out-of-bounds segment") {
    const auto& p = planted();
    const std::vector<Segment> bad{{"bicep_curl", 10, p.syn.recording.size() + 1, 0.0}};
    CHECK(code_of([&] { label_segments(bad, p.syn.recording, "bicep_curl"); }) == ErrorCode::InternalConsistency);
    const std::vector<Segment> empty_span{{"bicep_curl", 10, 10, 0.0}};
    CHECK(code_of([&] { label_segments(empty_span, p.syn.recording, "bicep_curl"); }) ==
          ErrorCode::InternalConsistency);
  }

  TEST_CASE("dataset and segment lists round trip through text") {
    const auto& p = planted();
    const auto r = extract_segments(p.profile, p.minima, p.tmpl, p.stream);
    const auto d = label_segments(r.segments, p.syn.recording, "bicep_curl", &p.tmpl, "0123456789abcdef");
    const auto back = parse_dataset(format_dataset(d));
    CHECK(back == d);
    CHECK(format_dataset(back) == format_dataset(d));
    CHECK(parse_segments(format_segments(r.segments)) == r.segments);
    CHECK(code_of([] { parse_dataset("{not json\n"); }) == ErrorCode::Format);
    CHECK(code_of([] { parse_segments("action,start_index,end_index,dtw_distance\nx,5,2,1\n"); }) ==
          ErrorCode::Format);
  }

  TEST_CASE("end to end determinism") {
    const auto& p = planted();
    const auto again = mdtw_scan(p.tmpl, p.stream);
    CHECK(again.distances == p.profile.distances);
    const auto r1 = extract_segments(p.profile, p.minima, p.tmpl, p.stream);
    const auto r2 = extract_segments(again, detect_local_minima(again), p.tmpl, p.stream);
    CHECK(format_dataset(label_segments(r1.segments, p.syn.recording, "bicep_curl", &p.tmpl)) ==
          format_dataset(label_segments(r2.segments, p.syn.recording, "bicep_curl", &p.tmpl)));
  }
}
