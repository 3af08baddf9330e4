#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>
#include <string>

#include "emglabel/dsp.hpp"
#include "emglabel/error.hpp"
#include "emglabel/pipeline.hpp"
#include "text.hpp"

namespace emglabel::pipeline {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& msg) {
  fail(ErrorCode::Config, key + ": " + msg);
}

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) config_error(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) config_error(where.empty() ? k : where + "." + k, "unknown key");
  }
}

std::string join(const std::string& where, const char* key) {
  return where.empty() ? key : where + "." + key;
}

double get_number(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) config_error(join(where, key), "expected a number");
  return v.get<double>();
}

std::optional<double> get_optional_number(const json& obj, const std::string& where, const char* key,
                                          std::optional<double> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) config_error(join(where, key), "expected a number or null");
  return v.get<double>();
}

long long get_integer(const json& obj, const std::string& where, const char* key, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
  }
  config_error(join(where, key), "expected an integer");
}

std::optional<std::size_t> get_optional_size(const json& obj, const std::string& where,
                                             const char* key, std::optional<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  if (obj.at(key).is_null()) return std::nullopt;
  const long long v = get_integer(obj, where, key, 0);
  if (v < 0) config_error(join(where, key), "must be >= 0");
  return static_cast<std::size_t>(v);
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) config_error(join(where, key), "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) config_error(join(where, key), "expected a string");
  return v.get<std::string>();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json_value(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["filter"] = {{"enabled", c.filter.enabled},           {"low_hz", c.filter.low_hz},
                 {"high_hz", c.filter.high_hz},           {"order", c.filter.order},
                 {"notch_enabled", c.filter.notch_enabled}, {"notch_hz", c.filter.notch_hz},
                 {"notch_q", c.filter.notch_q}};
  j["ssa"] = {{"enabled", c.ssa.enabled},
              {"window", c.ssa.window ? json(*c.ssa.window) : json(nullptr)},
              {"components", c.ssa.components}};
  j["mdtw"] = {{"window_factor", c.mdtw.window_factor},
               {"threshold", c.mdtw.threshold},
               {"max_depth", c.mdtw.max_depth},
               {"local_cost", c.mdtw.local_cost == matching::LocalCost::Absolute ? "absolute" : "squared"},
               {"normalize", c.mdtw.normalize},
               {"extend_to_window", c.mdtw.extend_to_window},
               {"refine", c.mdtw.refine},
               {"min_length_fraction", c.mdtw.min_length_fraction},
               {"channel", c.mdtw.channel},
               {"threads", c.mdtw.threads}};
  json actions = json::array();
  for (const auto& a : c.actions) {
    actions.push_back({{"name", a.name},
                       {"expected_count", a.expected_count},
                       {"max_distance", optional_json(a.max_distance)},
                       {"template_samples", a.template_samples}});
  }
  j["actions"] = std::move(actions);
  const auto& fo = c.features.options;
  j["features"] = {{"threshold_fraction", fo.threshold_fraction},
                   {"wa_threshold", optional_json(fo.wa_threshold)},
                   {"ssc_threshold", optional_json(fo.ssc_threshold)},
                   {"histogram_bins", fo.histogram_bins},
                   {"svd_order", fo.svd_order},
                   {"svd_delay", fo.svd_delay},
                   {"log_normalize", c.features.log_normalize},
                   {"lda_folds", c.features.lda_folds}};
  j["classifier"] = {{"kernel", std::string(classify::kernel_name(c.classifier.kernel))},
                     {"c", c.classifier.c},
                     {"gamma", optional_json(c.classifier.gamma)},
                     {"folds", c.classifier.folds},
                     {"train_fraction", c.classifier.train_fraction},
                     {"tolerance", c.classifier.tolerance},
                     {"max_iterations", c.classifier.max_iterations},
                     {"standardize", c.classifier.standardize}};
  j["merge"] = {{"alignment", c.merge.alignment == ingest::Alignment::Hold ? "hold" : "linear"},
                {"clock_offset_s", c.merge.clock_offset_s}};
  j["live"] = {{"bind", c.live.bind},
               {"port", c.live.port},
               {"hop", c.live.hop ? json(*c.live.hop) : json(nullptr)},
               {"linger_s", c.live.linger_s}};
  return j;
}

PipelineConfig from_json_value(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, "", {"seed", "filter", "ssa", "mdtw", "actions", "features", "classifier",
                         "merge", "live"});
  PipelineConfig c;
  const long long seed = get_integer(j, "", "seed", 7);
  if (seed < 0) config_error("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  const json empty = json::object();
  const json& f = j.contains("filter") ? j.at("filter") : empty;
  reject_unknown(f, "filter", {"enabled", "low_hz", "high_hz", "order", "notch_enabled", "notch_hz", "notch_q"});
  c.filter.enabled = get_bool(f, "filter", "enabled", c.filter.enabled);
  c.filter.low_hz = get_number(f, "filter", "low_hz", c.filter.low_hz);
  c.filter.high_hz = get_number(f, "filter", "high_hz", c.filter.high_hz);
  c.filter.order = static_cast<int>(get_integer(f, "filter", "order", c.filter.order));
  c.filter.notch_enabled = get_bool(f, "filter", "notch_enabled", c.filter.notch_enabled);
  c.filter.notch_hz = get_number(f, "filter", "notch_hz", c.filter.notch_hz);
  c.filter.notch_q = get_number(f, "filter", "notch_q", c.filter.notch_q);

  const json& s = j.contains("ssa") ? j.at("ssa") : empty;
  reject_unknown(s, "ssa", {"enabled", "window", "components"});
  c.ssa.enabled = get_bool(s, "ssa", "enabled", c.ssa.enabled);
  c.ssa.window = get_optional_size(s, "ssa", "window", c.ssa.window);
  c.ssa.components = get_optional_size(s, "ssa", "components", c.ssa.components).value_or(0);

  const json& m = j.contains("mdtw") ? j.at("mdtw") : empty;
  reject_unknown(m, "mdtw", {"window_factor", "threshold", "max_depth", "local_cost", "normalize",
                             "extend_to_window", "refine", "min_length_fraction", "channel", "threads"});
  c.mdtw.window_factor = get_number(m, "mdtw", "window_factor", c.mdtw.window_factor);
  c.mdtw.threshold = get_number(m, "mdtw", "threshold", c.mdtw.threshold);
  c.mdtw.max_depth = static_cast<int>(get_integer(m, "mdtw", "max_depth", c.mdtw.max_depth));
  const std::string cost = get_string(m, "mdtw", "local_cost", "absolute");
  if (cost == "absolute") c.mdtw.local_cost = matching::LocalCost::Absolute;
  else if (cost == "squared") c.mdtw.local_cost = matching::LocalCost::Squared;
  else config_error("mdtw.local_cost", "expected 'absolute' or 'squared'");
  c.mdtw.normalize = get_bool(m, "mdtw", "normalize", c.mdtw.normalize);
  c.mdtw.extend_to_window = get_bool(m, "mdtw", "extend_to_window", c.mdtw.extend_to_window);
  c.mdtw.refine = get_bool(m, "mdtw", "refine", c.mdtw.refine);
  c.mdtw.min_length_fraction = get_number(m, "mdtw", "min_length_fraction", c.mdtw.min_length_fraction);
  c.mdtw.channel = get_string(m, "mdtw", "channel", c.mdtw.channel);
  const long long threads = get_integer(m, "mdtw", "threads", 0);
  if (threads < 0 || threads > 1024) config_error("mdtw.threads", "must be in [0, 1024]");
  c.mdtw.threads = static_cast<unsigned>(threads);

  if (j.contains("actions")) {
    const auto& arr = j.at("actions");
    if (!arr.is_array()) config_error("actions", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "actions." + std::to_string(i);
      const auto& a = arr[i];
      reject_unknown(a, where, {"name", "template", "template_samples", "expected_count", "max_distance"});
      ActionConfig ac;
      ac.name = get_string(a, where, "name", "");
      const long long count = get_integer(a, where, "expected_count", 0);
      if (count < 1 || count > 1000000) config_error(where + ".expected_count", "must be >= 1");
      ac.expected_count = static_cast<int>(count);
      ac.max_distance = get_optional_number(a, where, "max_distance", std::nullopt);
      const bool has_path = a.contains("template");
      const bool has_samples = a.contains("template_samples");
      if (has_path == has_samples) {
        config_error(where, "give exactly one of 'template' (CSV path) or 'template_samples'");
      }
      if (has_path) {
        std::filesystem::path p = get_string(a, where, "template", "");
        if (p.is_relative()) p = base_dir / p;
        try {
          ac.template_samples = ingest::parse_template(text::read_file(p)).samples;
        } catch (const Error& e) {
          config_error(where + ".template", e.what());
        }
      } else {
        const auto& v = a.at("template_samples");
        if (!v.is_array()) config_error(where + ".template_samples", "expected an array of numbers");
        for (const auto& x : v) {
          if (!x.is_number()) config_error(where + ".template_samples", "expected an array of numbers");
          ac.template_samples.push_back(x.get<double>());
        }
      }
      c.actions.push_back(std::move(ac));
    }
  }

  const json& fe = j.contains("features") ? j.at("features") : empty;
  reject_unknown(fe, "features", {"threshold_fraction", "wa_threshold", "ssc_threshold", "histogram_bins",
                                  "svd_order", "svd_delay", "log_normalize", "lda_folds"});
  auto& fo = c.features.options;
  fo.threshold_fraction = get_number(fe, "features", "threshold_fraction", fo.threshold_fraction);
  fo.wa_threshold = get_optional_number(fe, "features", "wa_threshold", fo.wa_threshold);
  fo.ssc_threshold = get_optional_number(fe, "features", "ssc_threshold", fo.ssc_threshold);
  fo.histogram_bins = get_optional_size(fe, "features", "histogram_bins", fo.histogram_bins).value_or(0);
  fo.svd_order = get_optional_size(fe, "features", "svd_order", fo.svd_order).value_or(0);
  fo.svd_delay = get_optional_size(fe, "features", "svd_delay", fo.svd_delay).value_or(0);
  c.features.log_normalize = get_bool(fe, "features", "log_normalize", c.features.log_normalize);
  c.features.lda_folds = get_optional_size(fe, "features", "lda_folds", c.features.lda_folds).value_or(0);

  const json& cl = j.contains("classifier") ? j.at("classifier") : empty;
  reject_unknown(cl, "classifier", {"kernel", "c", "gamma", "folds", "train_fraction", "tolerance",
                                    "max_iterations", "standardize"});
  const std::string kernel = get_string(cl, "classifier", "kernel", "rbf");
  if (kernel != "rbf" && kernel != "linear") config_error("classifier.kernel", "expected 'rbf' or 'linear'");
  c.classifier.kernel = classify::kernel_from_name(kernel);
  c.classifier.c = get_number(cl, "classifier", "c", c.classifier.c);
  c.classifier.gamma = get_optional_number(cl, "classifier", "gamma", c.classifier.gamma);
  c.classifier.folds = get_optional_size(cl, "classifier", "folds", c.classifier.folds).value_or(0);
  c.classifier.train_fraction = get_number(cl, "classifier", "train_fraction", c.classifier.train_fraction);
  c.classifier.tolerance = get_number(cl, "classifier", "tolerance", c.classifier.tolerance);
  c.classifier.max_iterations =
      get_optional_size(cl, "classifier", "max_iterations", c.classifier.max_iterations).value_or(0);
  c.classifier.standardize = get_bool(cl, "classifier", "standardize", c.classifier.standardize);

  const json& mg = j.contains("merge") ? j.at("merge") : empty;
  reject_unknown(mg, "merge", {"alignment", "clock_offset_s"});
  const std::string align = get_string(mg, "merge", "alignment", "hold");
  if (align == "hold") c.merge.alignment = ingest::Alignment::Hold;
  else if (align == "linear") c.merge.alignment = ingest::Alignment::Linear;
  else config_error("merge.alignment", "expected 'hold' or 'linear'");
  c.merge.clock_offset_s = get_number(mg, "merge", "clock_offset_s", 0.0);

  const json& lv = j.contains("live") ? j.at("live") : empty;
  reject_unknown(lv, "live", {"bind", "port", "hop", "linger_s"});
  c.live.bind = get_string(lv, "live", "bind", c.live.bind);
  c.live.port = static_cast<int>(get_integer(lv, "live", "port", c.live.port));
  c.live.hop = get_optional_size(lv, "live", "hop", c.live.hop);
  c.live.linger_s = get_number(lv, "live", "linger_s", c.live.linger_s);

  validate_config(c);
  return c;
}

void check(bool ok, const char* key, const std::string& msg) {
  if (!ok) config_error(key, msg);
}

}  // namespace

void validate_config(const PipelineConfig& c) {
  const double fs = ingest::kMergedRateHz;
  const double nyq = fs / 2.0;
  const auto& f = c.filter;
  check(f.low_hz > 0.0 && f.low_hz < nyq, "filter.low_hz", "must lie in (0, 128)");
  check(f.high_hz > 0.0 && f.high_hz < nyq, "filter.high_hz", "must lie in (0, 128)");
  check(f.low_hz < f.high_hz, "filter.high_hz", "must exceed filter.low_hz");
  check(f.order >= 1 && f.order <= 32, "filter.order", "must be in [1, 32]");
  check(f.notch_hz > 0.0 && f.notch_hz < nyq, "filter.notch_hz", "must lie in (0, 128)");
  check(f.notch_q > 0.0 && std::isfinite(f.notch_q), "filter.notch_q", "must be positive");
  check(!c.ssa.window || *c.ssa.window >= 2, "ssa.window", "must be >= 2");
  check(c.ssa.components >= 1, "ssa.components", "must be >= 1");
  check(c.mdtw.window_factor >= 1.0 && std::isfinite(c.mdtw.window_factor), "mdtw.window_factor",
        "must be >= 1");
  check(c.mdtw.threshold > 0.0 && c.mdtw.threshold <= 1.0, "mdtw.threshold", "must lie in (0, 1]");
  check(c.mdtw.min_length_fraction >= 0.0 && c.mdtw.min_length_fraction <= 1.0, "mdtw.min_length_fraction",
        "must lie in [0, 1]");
  check(c.mdtw.max_depth >= 1 && c.mdtw.max_depth <= 16, "mdtw.max_depth", "must be in [1, 16]");
  check(ingest::angle_channel_from_name(c.mdtw.channel).has_value(), "mdtw.channel",
        "must be shoulder, elbow or wrist");
  check(!c.actions.empty(), "actions", "at least one action is required");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.actions.size(); ++i) {
    const auto& a = c.actions[i];
    const std::string where = "actions." + std::to_string(i);
    if (a.name.empty() || a.name.find_first_of(",\n\r\"") != std::string::npos) {
      config_error(where + ".name", "must be non-empty without commas, quotes or newlines");
    }
    if (!names.insert(a.name).second) config_error(where + ".name", "duplicate action name");
    if (a.expected_count < 1) config_error(where + ".expected_count", "must be >= 1");
    if (a.template_samples.size() < 2) config_error(where + ".template", "needs at least 2 samples");
    for (double v : a.template_samples) {
      if (!std::isfinite(v)) config_error(where + ".template", "holds a non-finite sample");
    }
    if (a.max_distance && !(*a.max_distance >= 0.0 && std::isfinite(*a.max_distance))) {
      config_error(where + ".max_distance", "must be >= 0 or null");
    }
  }
  try {
    features::validate_options(c.features.options);
  } catch (const Error& e) {
    config_error("features", e.what());
  }
  check(c.features.lda_folds >= 2, "features.lda_folds", "must be >= 2");
  check(c.classifier.c > 0.0 && std::isfinite(c.classifier.c), "classifier.c", "must be positive");
  check(!c.classifier.gamma || (*c.classifier.gamma > 0.0 && std::isfinite(*c.classifier.gamma)),
        "classifier.gamma", "must be positive or null");
  check(c.classifier.folds >= 2, "classifier.folds", "must be >= 2");
  check(c.classifier.train_fraction > 0.0 && c.classifier.train_fraction < 1.0,
        "classifier.train_fraction", "must lie in (0, 1)");
  check(c.classifier.tolerance > 0.0, "classifier.tolerance", "must be positive");
  check(c.classifier.max_iterations >= 1, "classifier.max_iterations", "must be >= 1");
  check(std::isfinite(c.merge.clock_offset_s), "merge.clock_offset_s", "must be finite");
  check(c.live.port >= 0 && c.live.port <= 65535, "live.port", "must be in [0, 65535]");
  check(!c.live.hop || *c.live.hop >= 1, "live.hop", "must be >= 1");
  check(c.live.linger_s >= 0.0 && std::isfinite(c.live.linger_s), "live.linger_s", "must be >= 0");
}

PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
  }
  return from_json_value(j, base_dir);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(text::read_file(path), path.parent_path());
}

std::string config_to_json(const PipelineConfig& config, int indent) {
  return to_json_value(config).dump(indent);
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  json root = to_json_value(config);
  json value_json;
  try {
    value_json = json::parse(value);
  } catch (const json::exception&) {
    value_json = std::string(value);
  }
  json* node = &root;
  const auto parts = text::split(key, '.');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string part(parts[i]);
    const bool last = i + 1 == parts.size();
    if (part.empty()) config_error(std::string(key), "malformed key");
    if (node->is_array()) {
      const auto idx = text::parse_int(part);
      if (!idx || *idx < 0 || static_cast<std::size_t>(*idx) >= node->size()) {
        config_error(std::string(key), "array index out of range");
      }
      node = &(*node)[static_cast<std::size_t>(*idx)];
    } else if (node->is_object()) {
      if (!node->contains(part) && !(last && i == 2 && parts[0] == "actions")) {
        config_error(std::string(key), "unknown key");
      }
      node = &(*node)[part];
    } else {
      config_error(std::string(key), "cannot descend into a scalar");
    }
    if (last) *node = value_json;
  }
  if (parts.size() == 3 && parts[0] == "actions" && parts[2] == "template") {
    root["actions"][static_cast<std::size_t>(*text::parse_int(parts[1]))].erase("template_samples");
  }
  config = from_json_value(root, {});
}

std::string config_hash(const PipelineConfig& config) {
  const std::string s = config_to_json(config, -1);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

matching::Template make_template(const ActionConfig& action) {
  matching::Template t;
  t.action_name = action.name;
  t.series = TimeSeries{action.template_samples, ingest::kMergedRateHz, 0.0};
  t.expected_count = action.expected_count;
  t.max_distance = action.max_distance;
  return t;
}

std::size_t scan_channel(const PipelineConfig& config) {
  const auto ch = ingest::angle_channel_from_name(config.mdtw.channel);
  if (!ch) config_error("mdtw.channel", "must be shoulder, elbow or wrist");
  return *ch;
}

}  // namespace emglabel::pipeline
