#include "emglabel/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <thread>

#include "emglabel/error.hpp"

namespace emglabel::matching {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <bool Squared>
inline double local(double x, double y) {
  const double d = x - y;
  if constexpr (Squared) {
    return d * d;
  } else {
    return std::abs(d);
  }
}

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidInput, "dtw input is empty");
}

// Returns accumulated cost and, when wanted, the length of the tie-broken path.
template <bool Squared, bool TrackLength>
double dtw_rows(std::span<const double> a, std::span<const double> b, std::vector<double>& prev,
                std::vector<double>& cur, std::vector<std::size_t>& prev_len,
                std::vector<std::size_t>& cur_len, std::size_t* path_len) {
  const std::size_t m = b.size();
  prev.assign(m + 1, kInf);
  cur.assign(m + 1, kInf);
  prev[0] = 0.0;
  if constexpr (TrackLength) {
    prev_len.assign(m + 1, 0);
    cur_len.assign(m + 1, 0);
  }
  for (std::size_t i = 1; i <= a.size(); ++i) {
    const double ai = a[i - 1];
    cur[0] = kInf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double diag = prev[j - 1];
      const double up = prev[j];
      const double left = cur[j - 1];
      double best = diag;
      int move = 0;
      if (up < best) {
        best = up;
        move = 1;
      }
      if (left < best) {
        best = left;
        move = 2;
      }
      cur[j] = local<Squared>(ai, b[j - 1]) + best;
      if constexpr (TrackLength) {
        const std::size_t base = move == 0 ? prev_len[j - 1] : move == 1 ? prev_len[j] : cur_len[j - 1];
        cur_len[j] = base + 1;
      }
    }
    std::swap(prev, cur);
    if constexpr (TrackLength) std::swap(prev_len, cur_len);
  }
  if constexpr (TrackLength) *path_len = prev_len[m];
  return prev[m];
}

struct Workspace {
  std::vector<double> prev, cur;
  std::vector<std::size_t> prev_len, cur_len;
};

double dtw_cost_ws(std::span<const double> a, std::span<const double> b, const DtwOptions& o,
                   Workspace& ws) {
  const bool sq = o.cost == LocalCost::Squared;
  if (!o.normalize) {
    return sq ? dtw_rows<true, false>(a, b, ws.prev, ws.cur, ws.prev_len, ws.cur_len, nullptr)
              : dtw_rows<false, false>(a, b, ws.prev, ws.cur, ws.prev_len, ws.cur_len, nullptr);
  }
  std::size_t len = 0;
  const double c = sq ? dtw_rows<true, true>(a, b, ws.prev, ws.cur, ws.prev_len, ws.cur_len, &len)
                      : dtw_rows<false, true>(a, b, ws.prev, ws.cur, ws.prev_len, ws.cur_len, &len);
  return c / static_cast<double>(len);
}

}  // namespace

double dtw_cost(std::span<const double> a, std::span<const double> b, const DtwOptions& options) {
  require_nonempty(a, b);
  Workspace ws;
  return dtw_cost_ws(a, b, options, ws);
}

DtwResult dtw_align(std::span<const double> a, std::span<const double> b,
                    const DtwOptions& options) {
  require_nonempty(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t stride = m + 1;
  std::vector<double> d((n + 1) * stride, kInf);
  d[0] = 0.0;
  const bool sq = options.cost == LocalCost::Squared;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double diag = d[(i - 1) * stride + j - 1];
      const double up = d[(i - 1) * stride + j];
      const double left = d[i * stride + j - 1];
      double best = diag;
      if (up < best) best = up;
      if (left < best) best = left;
      const double c = sq ? local<true>(a[i - 1], b[j - 1]) : local<false>(a[i - 1], b[j - 1]);
      d[i * stride + j] = c + best;
    }
  }
  DtwResult out;
  std::size_t i = n;
  std::size_t j = m;
  out.path.emplace_back(i - 1, j - 1);
  while (i > 1 || j > 1) {
    const double diag = d[(i - 1) * stride + j - 1];
    const double up = d[(i - 1) * stride + j];
    const double left = d[i * stride + j - 1];
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    out.path.emplace_back(i - 1, j - 1);
  }
  std::reverse(out.path.begin(), out.path.end());
  out.cost = d[n * stride + m];
  if (options.normalize) out.cost /= static_cast<double>(out.path.size());
  return out;
}

DtwResult dtw_distance(const TimeSeries& a, const TimeSeries& b, const DtwOptions& options) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidInput, "dtw input is empty");
  return dtw_align(a.samples, b.samples, options);
}

SubsequenceMatch subsequence_match(std::span<const double> a, std::span<const double> b,
                                   const DtwOptions& options) {
  require_nonempty(a, b);
  const std::size_t m = b.size();
  const bool sq = options.cost == LocalCost::Squared;
  std::vector<double> prev(m + 1, 0.0), cur(m + 1, kInf);
  std::vector<std::size_t> prev_s(m + 1), cur_s(m + 1), prev_len(m + 1, 0), cur_len(m + 1, 0);
  for (std::size_t j = 0; j <= m; ++j) prev_s[j] = j == 0 ? 0 : j - 1;
  prev[0] = kInf;  // a match must consume at least one sample of b
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = kInf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double diag = i == 1 ? 0.0 : prev[j - 1];
      const double up = prev[j];
      const double left = cur[j - 1];
      double best = diag;
      std::size_t start = i == 1 ? j - 1 : prev_s[j - 1];
      std::size_t len = i == 1 ? 0 : prev_len[j - 1];
      if (up < best) {
        best = up;
        start = i == 1 ? j - 1 : prev_s[j];
        len = i == 1 ? 0 : prev_len[j];
      }
      if (left < best) {
        best = left;
        start = cur_s[j - 1];
        len = cur_len[j - 1];
      }
      const double c = sq ? local<true>(a[i - 1], b[j - 1]) : local<false>(a[i - 1], b[j - 1]);
      cur[j] = c + best;
      cur_s[j] = start;
      cur_len[j] = len + 1;
    }
    std::swap(prev, cur);
    std::swap(prev_s, cur_s);
    std::swap(prev_len, cur_len);
  }
  SubsequenceMatch out;
  out.cost = kInf;
  for (std::size_t j = 1; j <= m; ++j) {
    const double c = options.normalize ? prev[j] / static_cast<double>(prev_len[j]) : prev[j];
    if (c < out.cost) {
      out.cost = c;
      out.start = prev_s[j];
      out.end = j;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void validate_template(const Template& t) {
  if (t.series.size() < 2) {
    fail(ErrorCode::InvalidParameter, "template '" + t.action_name + "' needs at least 2 samples");
  }
  require_valid(t.series, "template");
  if (t.expected_count < 1) {
    fail(ErrorCode::InvalidParameter, "expected_count must be >= 1 for '" + t.action_name + "'");
  }
  if (t.max_distance && (!(*t.max_distance >= 0.0) || !std::isfinite(*t.max_distance))) {
    fail(ErrorCode::InvalidParameter, "max_distance must be a finite value >= 0");
  }
}

std::size_t window_length(std::size_t template_len, double window_factor) {
  if (!(window_factor >= 1.0) || !std::isfinite(window_factor)) {
    fail(ErrorCode::InvalidParameter, "window factor must be >= 1");
  }
  return static_cast<std::size_t>(std::llround(window_factor * static_cast<double>(template_len)));
}

DistanceProfile mdtw_scan(const Template& tmpl, const TimeSeries& stream,
                          const ScanOptions& options) {
  validate_template(tmpl);
  if (stream.empty()) fail(ErrorCode::InsufficientData, "stream is empty");
  require_valid(stream, "stream");
  const std::size_t n = tmpl.series.size();
  const std::size_t w = window_length(n, options.window_factor);
  const std::size_t big_n = stream.size();
  if (big_n < w) {
    fail(ErrorCode::InsufficientData, "stream of " + std::to_string(big_n) +
                                          " samples is shorter than the window W=" +
                                          std::to_string(w) + " for '" + tmpl.action_name + "'");
  }
  DistanceProfile out;
  out.window_len = w;
  out.template_len = n;
  const std::size_t count = big_n - w + 1;
  out.distances.resize(count);
  out.positions.resize(count);
  for (std::size_t p = 0; p < count; ++p) out.positions[p] = p;

  const std::span<const double> a = tmpl.series.samples;
  const std::span<const double> s = stream.samples;
  auto work = [&](std::size_t begin, std::size_t end) {
    Workspace ws;
    for (std::size_t p = begin; p < end; ++p) {
      out.distances[p] = dtw_cost_ws(a, s.subspan(p, w), options.dtw, ws);
    }
  };
  unsigned threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>((count + 63) / 64)));
  if (threads <= 1) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(count, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> normalize_profile(std::span<const double> d) {
  std::vector<double> v(d.begin(), d.end());
  if (v.empty()) return v;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn;
  const double range = *mx - lo;
  for (auto& x : v) x = range > 0.0 ? (x - lo) / range : 0.0;
  return v;
}

namespace {

double barrier_prominence(std::span<const double> v, std::size_t lo, std::size_t hi,
                          std::size_t first, std::size_t last) {
  const double x = v[first];
  double lm = x;
  for (std::size_t k = first; k-- > lo;) {
    if (v[k] < x) break;
    lm = std::max(lm, v[k]);
  }
  double rm = x;
  for (std::size_t k = last + 1; k <= hi; ++k) {
    if (v[k] < x) break;
    rm = std::max(rm, v[k]);
  }
  return std::min(lm, rm) - x;
}

}  // namespace

std::vector<std::size_t> prominent_minima(std::span<const double> v, std::size_t lo,
                                          std::size_t hi, double threshold) {
  std::vector<std::size_t> out;
  if (hi >= v.size() || hi < lo + 2) return out;
  std::size_t i = lo + 1;
  while (i < hi) {
    if (v[i] < v[i - 1]) {
      std::size_t j = i;
      while (j + 1 <= hi && v[j + 1] == v[i]) ++j;
      if (j + 1 <= hi && v[j + 1] > v[i]) {
        if (barrier_prominence(v, lo, hi, i, j) >= threshold) out.push_back((i + j) / 2);
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

double minimum_prominence(std::span<const double> v, std::size_t i) {
  if (i >= v.size()) return 0.0;
  std::size_t first = i;
  std::size_t last = i;
  while (first > 0 && v[first - 1] == v[i]) --first;
  while (last + 1 < v.size() && v[last + 1] == v[i]) ++last;
  if (first == 0 || last + 1 >= v.size()) return 0.0;
  if (!(v[first - 1] > v[i]) || !(v[last + 1] > v[i])) return 0.0;
  return barrier_prominence(v, 0, v.size() - 1, first, last);
}

std::vector<std::size_t> detect_local_minima(std::span<const double> distances, double threshold,
                                             int max_depth) {
  if (distances.empty()) fail(ErrorCode::InvalidInput, "distance profile is empty");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::InvalidParameter, "threshold must be in (0, 1]");
  }
  if (max_depth < 1) fail(ErrorCode::InvalidParameter, "max_depth must be >= 1");
  if (!all_finite(distances)) fail(ErrorCode::InvalidInput, "distance profile is not finite");
  const auto v = normalize_profile(distances);
  std::set<std::size_t> found;

  struct Frame {
    std::size_t lo, hi;
    double threshold;
    int level;
  };
  std::vector<Frame> stack{{0, v.size() - 1, threshold, 1}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const auto minima = prominent_minima(v, f.lo, f.hi, f.threshold);
    found.insert(minima.begin(), minima.end());
    if (f.level >= max_depth) continue;
    std::vector<std::size_t> bounds;
    bounds.push_back(f.lo);
    bounds.insert(bounds.end(), minima.begin(), minima.end());
    bounds.push_back(f.hi);
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
      if (bounds[k + 1] - bounds[k] + 1 >= 3) {
        stack.push_back({bounds[k], bounds[k + 1], f.threshold / 2.0, f.level + 1});
      }
    }
  }
  return {found.begin(), found.end()};
}

std::vector<std::size_t> detect_local_minima(const DistanceProfile& profile, double threshold,
                                             int max_depth) {
  return detect_local_minima(profile.distances, threshold, max_depth);
}

// ---------------------------------------------------------------------------

ExtractionResult extract_segments(const DistanceProfile& profile,
                                  std::span<const std::size_t> minima, const Template& tmpl,
                                  const TimeSeries& stream, const ExtractOptions& options) {
  validate_template(tmpl);
  if (!(options.min_length_fraction >= 0.0 && options.min_length_fraction <= 1.0)) {
    fail(ErrorCode::InvalidParameter, "min_length_fraction must be in [0, 1]");
  }
  const std::size_t need = options.extend_to_window ? std::max<std::size_t>(1, options.min_minima)
                                                    : std::max<std::size_t>(2, options.min_minima);
  if (minima.size() < need) {
    fail(ErrorCode::InsufficientBoundaries, "'" + tmpl.action_name + "': need at least " +
                                                std::to_string(need) + " minima, got " +
                                                std::to_string(minima.size()));
  }
  const std::size_t big_n = stream.size();
  std::vector<std::size_t> pos;
  for (std::size_t k = 0; k < minima.size(); ++k) {
    if (minima[k] >= profile.positions.size()) {
      fail(ErrorCode::InvalidInput, "minimum index outside the profile");
    }
    if (k > 0 && !(minima[k] > minima[k - 1])) {
      fail(ErrorCode::InvalidInput, "minima must be sorted and distinct");
    }
    pos.push_back(profile.positions[minima[k]]);
  }
  if (pos.back() >= big_n) fail(ErrorCode::InvalidInput, "profile does not match the stream");

  const std::span<const double> a = tmpl.series.samples;
  const std::span<const double> s = stream.samples;
  const std::size_t w = profile.window_len;
  std::vector<Segment> cands;
  const std::size_t spans = options.extend_to_window ? pos.size() : pos.size() - 1;
  Workspace ws;
  std::size_t too_short = 0;
  const double min_len = options.min_length_fraction * static_cast<double>(a.size());
  for (std::size_t k = 0; k < spans; ++k) {
    std::size_t begin = pos[k];
    std::size_t end = k + 1 < pos.size() ? pos[k + 1] : begin + w;
    if (options.extend_to_window) end = std::max(end, begin + w);
    end = std::min(end, big_n);
    if (end <= begin) continue;
    if (options.refine) {
      const auto m = subsequence_match(a, s.subspan(begin, end - begin), options.dtw);
      end = begin + m.end;
      begin += m.start;
      if (static_cast<double>(end - begin) < min_len) {
        ++too_short;
        continue;
      }
    }
    const double d = dtw_cost_ws(a, s.subspan(begin, end - begin), options.dtw, ws);
    cands.push_back({tmpl.action_name, begin, end, d});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Segment& x, const Segment& y) {
    if (x.dtw_distance != y.dtw_distance) return x.dtw_distance < y.dtw_distance;
    return x.start_index < y.start_index;
  });

  ExtractionResult out;
  out.candidates = cands.size() + too_short;
  out.discarded_by_length = too_short;
  std::vector<Segment> survivors;
  for (auto& c : cands) {
    if (tmpl.max_distance && c.dtw_distance > *tmpl.max_distance) {
      ++out.discarded_by_distance;
    } else {
      survivors.push_back(std::move(c));
    }
  }
  if (survivors.empty()) {
    out.short_of_expected = true;
    out.diagnostic = "no candidate left (" + std::to_string(out.discarded_by_length) + " too short, " +
                     std::to_string(out.discarded_by_distance) + " beyond max_distance)";
    return out;
  }
  const auto want = static_cast<std::size_t>(tmpl.expected_count);
  for (auto& c : survivors) {
    if (out.segments.size() == want) break;
    const bool overlaps = std::any_of(out.segments.begin(), out.segments.end(), [&](const Segment& g) {
      return c.start_index < g.end_index && g.start_index < c.end_index;
    });
    if (overlaps) {
      ++out.discarded_by_overlap;
    } else {
      out.segments.push_back(std::move(c));
    }
  }
  if (out.segments.size() < want) {
    out.short_of_expected = true;
    out.diagnostic = "found " + std::to_string(out.segments.size()) + " of " +
                     std::to_string(want) + " expected segments";
  }
  return out;
}

// ---------------------------------------------------------------------------

void LabeledDataset::append(LabeledDataset&& other) {
  if (config_hash.empty()) config_hash = other.config_hash;
  for (auto& t : other.templates) templates.push_back(std::move(t));
  for (auto& e : other.entries) entries.push_back(std::move(e));
}

LabeledDataset label_segments(std::span<const Segment> segments,
                              const ingest::MergedRecording& recording,
                              std::string_view action_name, const Template* tmpl,
                              std::string_view config_hash) {
  LabeledDataset out;
  out.config_hash = std::string(config_hash);
  out.sample_rate_hz = recording.sample_rate_hz;
  if (tmpl != nullptr) {
    out.templates.push_back(
        {std::string(action_name), tmpl->series.samples, tmpl->expected_count, tmpl->max_distance});
  }
  for (const auto& seg : segments) {
    if (!(seg.start_index < seg.end_index) || seg.end_index > recording.size()) {
      fail(ErrorCode::InternalConsistency,
           "segment [" + std::to_string(seg.start_index) + ", " + std::to_string(seg.end_index) +
               ") outside recording of " + std::to_string(recording.size()) + " rows");
    }
    LabeledSegment e;
    e.action_name = std::string(action_name);
    e.start_index = seg.start_index;
    e.end_index = seg.end_index;
    e.dtw_distance = seg.dtw_distance;
    const auto b = static_cast<std::ptrdiff_t>(seg.start_index);
    const auto en = static_cast<std::ptrdiff_t>(seg.end_index);
    for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) {
      e.emg[c].assign(recording.emg[c].begin() + b, recording.emg[c].begin() + en);
    }
    for (std::size_t c = 0; c < ingest::kAngleChannels; ++c) {
      e.angle_targets[c].assign(recording.angles[c].begin() + b, recording.angles[c].begin() + en);
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace emglabel::matching
