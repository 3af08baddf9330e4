#include <json.hpp>
#include <string>

#include "emglabel/error.hpp"
#include "emglabel/matching.hpp"
#include "text.hpp"

namespace emglabel::matching {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kSchema = "emglabel.dataset";
constexpr int kVersion = 1;

std::string dump_line(const json& j) { return j.dump() + "\n"; }

template <typename T>
T field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) {
    fail(ErrorCode::Format, "dataset line " + std::to_string(line) + ": missing '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::Format, "dataset line " + std::to_string(line) + ": bad '" + key + "'");
  }
}

}  // namespace

std::string format_dataset(const LabeledDataset& ds) {
  json header;
  header["record"] = "header";
  header["schema"] = kSchema;
  header["version"] = kVersion;
  header["config_hash"] = ds.config_hash;
  header["sample_rate_hz"] = ds.sample_rate_hz;
  header["segments"] = ds.entries.size();
  json templates = json::array();
  for (const auto& t : ds.templates) {
    json jt;
    jt["action"] = t.action_name;
    jt["expected_count"] = t.expected_count;
    jt["max_distance"] = t.max_distance ? json(*t.max_distance) : json(nullptr);
    jt["samples"] = t.samples;
    templates.push_back(std::move(jt));
  }
  header["templates"] = std::move(templates);
  std::string out = dump_line(header);
  for (const auto& e : ds.entries) {
    json j;
    j["record"] = "segment";
    j["action"] = e.action_name;
    j["start_index"] = e.start_index;
    j["end_index"] = e.end_index;
    j["dtw_distance"] = e.dtw_distance;
    json emg;
    for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) {
      emg["ch" + std::to_string(c + 1)] = e.emg[c];
    }
    j["emg"] = std::move(emg);
    json angles;
    for (std::size_t c = 0; c < ingest::kAngleChannels; ++c) {
      angles[std::string(ingest::angle_channel_name(c))] = e.angle_targets[c];
    }
    j["angles"] = std::move(angles);
    out += dump_line(j);
  }
  return out;
}

LabeledDataset parse_dataset(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty()) fail(ErrorCode::Format, "dataset is empty (missing header record)");
  auto parse = [](std::string_view line, std::size_t no) {
    try {
      return json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::Format, "dataset line " + std::to_string(no) + ": " + e.what());
    }
  };
  const json header = parse(rows[0], 1);
  if (field<std::string>(header, "record", 1) != "header" ||
      field<std::string>(header, "schema", 1) != kSchema) {
    fail(ErrorCode::Format, "dataset line 1: not a dataset header");
  }
  if (field<int>(header, "version", 1) != kVersion) {
    fail(ErrorCode::Format, "dataset line 1: unsupported version");
  }
  LabeledDataset ds;
  ds.config_hash = field<std::string>(header, "config_hash", 1);
  ds.sample_rate_hz = field<double>(header, "sample_rate_hz", 1);
  for (const auto& jt : field<json>(header, "templates", 1)) {
    DatasetTemplate t;
    t.action_name = field<std::string>(jt, "action", 1);
    t.expected_count = field<int>(jt, "expected_count", 1);
    if (jt.contains("max_distance") && !jt["max_distance"].is_null()) {
      t.max_distance = field<double>(jt, "max_distance", 1);
    }
    t.samples = field<std::vector<double>>(jt, "samples", 1);
    ds.templates.push_back(std::move(t));
  }
  const auto expected = field<std::size_t>(header, "segments", 1);
  for (std::size_t li = 1; li < rows.size(); ++li) {
    if (text::trim(rows[li]).empty()) continue;
    const std::size_t no = li + 1;
    const json j = parse(rows[li], no);
    if (field<std::string>(j, "record", no) != "segment") {
      fail(ErrorCode::Format, "dataset line " + std::to_string(no) + ": expected a segment record");
    }
    LabeledSegment e;
    e.action_name = field<std::string>(j, "action", no);
    e.start_index = field<std::size_t>(j, "start_index", no);
    e.end_index = field<std::size_t>(j, "end_index", no);
    e.dtw_distance = field<double>(j, "dtw_distance", no);
    const json emg = field<json>(j, "emg", no);
    const json angles = field<json>(j, "angles", no);
    const std::size_t len = e.end_index > e.start_index ? e.end_index - e.start_index : 0;
    if (len == 0) fail(ErrorCode::Format, "dataset line " + std::to_string(no) + ": empty interval");
    for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) {
      const std::string key = "ch" + std::to_string(c + 1);
      e.emg[c] = field<std::vector<double>>(emg, key.c_str(), no);
      if (e.emg[c].size() != len) {
        fail(ErrorCode::Format, "dataset line " + std::to_string(no) + ": slice length mismatch");
      }
    }
    for (std::size_t c = 0; c < ingest::kAngleChannels; ++c) {
      const std::string key(ingest::angle_channel_name(c));
      e.angle_targets[c] = field<std::vector<double>>(angles, key.c_str(), no);
      if (e.angle_targets[c].size() != len) {
        fail(ErrorCode::Format, "dataset line " + std::to_string(no) + ": slice length mismatch");
      }
    }
    ds.entries.push_back(std::move(e));
  }
  if (ds.entries.size() != expected) {
    fail(ErrorCode::Format, "dataset header announces " + std::to_string(expected) +
                                " segments, found " + std::to_string(ds.entries.size()));
  }
  return ds;
}

void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  text::write_file(path, format_dataset(dataset));
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  return parse_dataset(text::read_file(path));
}

std::string format_segments(std::span<const Segment> segments) {
  std::string out = "action,start_index,end_index,dtw_distance\n";
  for (const auto& s : segments) {
    out += s.action_name + "," + std::to_string(s.start_index) + "," +
           std::to_string(s.end_index) + ",";
    text::append_double(out, s.dtw_distance);
    out.push_back('\n');
  }
  return out;
}

std::vector<Segment> parse_segments(std::string_view content) {
  const auto rows = text::lines(content);
  if (rows.empty() || text::trim(rows[0]) != "action,start_index,end_index,dtw_distance") {
    fail(ErrorCode::Format, "line 1: segments header must be 'action,start_index,end_index,dtw_distance'");
  }
  std::vector<Segment> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i]);
    const std::string where = "line " + std::to_string(i + 1);
    if (f.size() != 4) fail(ErrorCode::Format, where + ": expected 4 fields");
    const auto s = text::parse_int(f[1]);
    const auto e = text::parse_int(f[2]);
    const auto d = text::parse_double(f[3]);
    if (!s || !e || !d || *s < 0 || *e <= *s) fail(ErrorCode::Format, where + ": malformed segment");
    out.push_back({std::string(text::trim(f[0])), static_cast<std::size_t>(*s),
                   static_cast<std::size_t>(*e), *d});
  }
  return out;
}

}  // namespace emglabel::matching
