#include "emglabel/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <json.hpp>
#include <map>
#include <thread>

#include "emglabel/dsp.hpp"
#include "emglabel/error.hpp"
#include "text.hpp"

namespace emglabel::pipeline {

using json = nlohmann::ordered_json;
using ingest::MergedRecording;

MergedRecording preprocess(const MergedRecording& raw, const PipelineConfig& config) {
  validate_config(config);
  raw.validate();
  if (raw.empty()) fail(ErrorCode::InsufficientData, "recording is empty");
  MergedRecording out = raw;
  const auto& f = config.filter;
  if (f.enabled) {
    for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) {
      TimeSeries s = raw.emg_series(c);
      s = dsp::bandpass_filter(s, f.low_hz, f.high_hz, f.order);
      if (f.notch_enabled) s = dsp::notch_filter(s, f.notch_hz, f.notch_q);
      out.emg[c] = std::move(s.samples);
    }
  }
  if (config.ssa.enabled) {
    for (std::size_t c = 0; c < ingest::kAngleChannels; ++c) {
      const TimeSeries s = raw.angle_series(c);
      const std::size_t window = config.ssa.window.value_or(dsp::default_ssa_window(s.size()));
      out.angles[c] = dsp::ssa_denoise(s, window, config.ssa.components).samples;
    }
  }
  return out;
}

namespace {

ActionOutcome segment_action(const TimeSeries& stream, const ActionConfig& action,
                             const PipelineConfig& config, std::size_t min_minima) {
  ActionOutcome out;
  out.report.action = action.name;
  const char* stage = "template";
  try {
    const matching::Template tmpl = make_template(action);
    matching::validate_template(tmpl);
    stage = "mdtw_scan";
    matching::ScanOptions scan;
    scan.window_factor = config.mdtw.window_factor;
    scan.dtw = {config.mdtw.local_cost, config.mdtw.normalize};
    scan.threads = config.mdtw.threads;
    out.profile = matching::mdtw_scan(tmpl, stream, scan);
    out.report.profile_length = out.profile.size();
    stage = "detect_local_minima";
    out.minima = matching::detect_local_minima(out.profile, config.mdtw.threshold, config.mdtw.max_depth);
    out.report.minima = out.minima.size();
    stage = "extract_segments";
    matching::ExtractOptions ex;
    ex.extend_to_window = config.mdtw.extend_to_window;
    ex.refine = config.mdtw.refine;
    ex.min_minima = min_minima;
    ex.min_length_fraction = config.mdtw.min_length_fraction;
    ex.dtw = scan.dtw;
    auto r = matching::extract_segments(out.profile, out.minima, tmpl, stream, ex);
    out.report.candidates = r.candidates;
    out.report.discarded_by_distance = r.discarded_by_distance;
    out.report.discarded_by_overlap = r.discarded_by_overlap;
    out.report.discarded_by_length = r.discarded_by_length;
    out.report.short_of_expected = r.short_of_expected;
    out.report.diagnostic = r.diagnostic;
    out.segments = std::move(r.segments);
    out.report.segments = out.segments.size();
    for (const auto& s : out.segments) out.report.distances.push_back(s.dtw_distance);
  } catch (const Error& e) {
    out.report.ok = false;
    out.report.stage = stage;
    out.report.error_code = error_code_name(e.code());
    out.report.error = e.what();
    out.segments.clear();
  }
  return out;
}

}  // namespace

std::vector<ActionOutcome> segment_recording(const MergedRecording& preprocessed,
                                             const PipelineConfig& config, std::size_t min_minima) {
  validate_config(config);
  const TimeSeries stream = preprocessed.angle_series(scan_channel(config));
  std::vector<ActionOutcome> out(config.actions.size());
  if (config.actions.size() == 1 || config.mdtw.threads == 1) {
    for (std::size_t a = 0; a < config.actions.size(); ++a) {
      out[a] = segment_action(stream, config.actions[a], config, min_minima);
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t a = 0; a < config.actions.size(); ++a) {
      pool.emplace_back([&, a] { out[a] = segment_action(stream, config.actions[a], config, min_minima); });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

matching::LabeledDataset label_recording(std::span<const matching::Segment> segments,
                                         const MergedRecording& preprocessed,
                                         const PipelineConfig& config) {
  std::map<std::string, std::vector<matching::Segment>> by_action;
  for (const auto& a : config.actions) by_action[a.name];
  for (const auto& s : segments) {
    const auto it = by_action.find(s.action_name);
    if (it == by_action.end()) {
      fail(ErrorCode::InvalidInput, "segment names unconfigured action '" + s.action_name + "'");
    }
    it->second.push_back(s);
  }
  const std::string hash = config_hash(config);
  matching::LabeledDataset ds;
  ds.config_hash = hash;
  ds.sample_rate_hz = preprocessed.sample_rate_hz;
  for (const auto& a : config.actions) {
    const auto tmpl = make_template(a);
    ds.append(matching::label_segments(by_action[a.name], preprocessed, a.name, &tmpl, hash));
  }
  return ds;
}

bool PipelineReport::ok() const {
  return std::all_of(actions.begin(), actions.end(), [](const ActionReport& a) { return a.ok; });
}

std::string format_report(const PipelineReport& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["rows"] = r.rows;
  j["ok"] = r.ok();
  json actions = json::array();
  for (const auto& a : r.actions) {
    json ja;
    ja["action"] = a.action;
    ja["ok"] = a.ok;
    if (!a.ok) {
      ja["stage"] = a.stage;
      ja["error_code"] = a.error_code;
      ja["error"] = a.error;
    }
    ja["profile_length"] = a.profile_length;
    ja["minima"] = a.minima;
    ja["candidates"] = a.candidates;
    ja["segments"] = a.segments;
    ja["discarded_by_distance"] = a.discarded_by_distance;
    ja["discarded_by_length"] = a.discarded_by_length;
    ja["discarded_by_overlap"] = a.discarded_by_overlap;
    ja["short_of_expected"] = a.short_of_expected;
    ja["diagnostic"] = a.diagnostic;
    ja["distances"] = a.distances;
    actions.push_back(std::move(ja));
  }
  j["actions"] = std::move(actions);
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline_preprocessed(MergedRecording preprocessed, const PipelineConfig& config) {
  PipelineResult out;
  out.preprocessed = std::move(preprocessed);
  out.outcomes = segment_recording(out.preprocessed, config);
  out.report.config_hash = config_hash(config);
  out.report.rows = out.preprocessed.size();
  for (const auto& o : out.outcomes) {
    out.report.actions.push_back(o.report);
    out.segments.insert(out.segments.end(), o.segments.begin(), o.segments.end());
  }
  out.dataset = label_recording(out.segments, out.preprocessed, config);
  return out;
}

PipelineResult run_pipeline(const MergedRecording& raw, const PipelineConfig& config) {
  return run_pipeline_preprocessed(preprocess(raw, config), config);
}

// ---------------------------------------------------------------------------

features::FeatureMatrix featurize(const matching::LabeledDataset& dataset, const PipelineConfig& config) {
  auto m = features::extract_features(dataset, config.features.options, config.mdtw.threads);
  if (config.features.log_normalize) m = features::log_normalize(m);
  return m;
}

classify::SvmParams svm_params(const PipelineConfig& config) {
  classify::SvmParams p;
  p.c = config.classifier.c;
  p.gamma = config.classifier.gamma;
  p.kernel = config.classifier.kernel;
  p.tolerance = config.classifier.tolerance;
  p.max_iterations = config.classifier.max_iterations;
  p.standardize = config.classifier.standardize;
  return p;
}

TrainedModel train(const features::FeatureMatrix& matrix, const PipelineConfig& config) {
  validate_config(config);
  if (matrix.row_count() == 0) fail(ErrorCode::InvalidTrainingSet, "feature matrix is empty");
  TrainedModel out;
  out.seed = config.seed;
  out.train_fraction = config.classifier.train_fraction;
  out.config_hash = config_hash(config);
  const Split split = train_eval_split(matrix.labels, out.train_fraction, out.seed);
  const auto train_m = matrix.select_rows(split.train);
  out.train_rows = train_m.row_count();
  out.selection = features::rank_and_select(train_m, config.features.lda_folds, out.seed);
  const auto reduced = features::apply_selection(train_m, out.selection);
  const auto params = svm_params(config);
  out.cv = classify::cross_validate(reduced.rows, reduced.labels, config.classifier.folds, out.seed, params);
  out.svm = classify::svm_fit(reduced.rows, reduced.labels, params);
  out.train_accuracy = classify::accuracy(out.svm, reduced.rows, reduced.labels);
  return out;
}

EvaluationResult evaluate_holdout(const TrainedModel& model, const features::FeatureMatrix& matrix) {
  const Split split = train_eval_split(matrix.labels, model.train_fraction, model.seed);
  const auto eval_m = features::apply_selection(matrix.select_rows(split.eval), model.selection);
  EvaluationResult out;
  out.eval_rows = eval_m.row_count();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < eval_m.row_count(); ++i) {
    const auto p = classify::svm_predict(model.svm, eval_m.rows[i]);
    out.truth.push_back(eval_m.labels[i]);
    out.predicted.push_back(p.label);
    if (p.label == eval_m.labels[i]) ++correct;
  }
  out.holdout_accuracy =
      out.eval_rows ? static_cast<double>(correct) / static_cast<double>(out.eval_rows) : 0.0;
  return out;
}

namespace {

json selection_json(const features::FeatureSelection& s) {
  json chosen = json::array();
  for (const auto& [ch, f] : s.chosen) {
    chosen.push_back("ch" + std::to_string(ch) + "_" +
                     std::string(features::feature_name(static_cast<features::FeatureId>(f))));
  }
  json rankings = json::array();
  for (std::size_t c = 0; c < s.rankings.size(); ++c) {
    json r = json::array();
    for (const auto& sc : s.rankings[c]) {
      r.push_back({{"feature", std::string(features::feature_name(static_cast<features::FeatureId>(sc.feature_id)))},
                   {"accuracy", sc.accuracy},
                   {"degenerate", sc.degenerate}});
    }
    rankings.push_back({{"channel", c + 1}, {"ranking", std::move(r)}});
  }
  return {{"chosen", std::move(chosen)}, {"rankings", std::move(rankings)}};
}

json cv_json(const classify::CvResult& cv) {
  return {{"mean_accuracy", cv.mean_accuracy}, {"std_accuracy", cv.std_accuracy}, {"per_fold", cv.per_fold}};
}

}  // namespace

std::string format_trained_model(const TrainedModel& m) {
  json j;
  j["schema"] = "emglabel.model";
  j["version"] = 1;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["train_fraction"] = m.train_fraction;
  j["train_rows"] = m.train_rows;
  j["train_accuracy"] = m.train_accuracy;
  j["selection"] = selection_json(m.selection);
  j["cross_validation"] = cv_json(m.cv);
  j["svm"] = json::parse(classify::format_model(m.svm));
  return j.dump(2) + "\n";
}

TrainedModel parse_trained_model(std::string_view content) {
  try {
    const json j = json::parse(content);
    if (j.at("schema").get<std::string>() != "emglabel.model" || j.at("version").get<int>() != 1) {
      fail(ErrorCode::Format, "not a model file");
    }
    TrainedModel m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    m.train_rows = j.at("train_rows").get<std::size_t>();
    m.train_accuracy = j.at("train_accuracy").get<double>();
    const auto& sel = j.at("selection");
    for (const auto& name : sel.at("chosen")) {
      const auto s = name.get<std::string>();
      const auto us = s.find('_');
      const auto ch = us != std::string::npos && s.starts_with("ch") ? text::parse_int(s.substr(2, us - 2))
                                                                     : std::nullopt;
      const auto fid = us != std::string::npos ? features::feature_from_name(s.substr(us + 1)) : std::nullopt;
      if (!ch || !fid) fail(ErrorCode::Format, "model: bad selected column '" + s + "'");
      m.selection.chosen.emplace_back(static_cast<int>(*ch), static_cast<int>(*fid));
    }
    for (const auto& r : sel.at("rankings")) {
      const auto ch = r.at("channel").get<std::size_t>();
      if (ch < 1 || ch > m.selection.rankings.size()) fail(ErrorCode::Format, "model: bad ranking channel");
      for (const auto& sc : r.at("ranking")) {
        const auto fid = features::feature_from_name(sc.at("feature").get<std::string>());
        if (!fid) fail(ErrorCode::Format, "model: bad ranking feature");
        m.selection.rankings[ch - 1].push_back(
            {static_cast<int>(*fid), sc.at("accuracy").get<double>(), sc.at("degenerate").get<bool>()});
      }
    }
    const auto& cv = j.at("cross_validation");
    m.cv.mean_accuracy = cv.at("mean_accuracy").get<double>();
    m.cv.std_accuracy = cv.at("std_accuracy").get<double>();
    m.cv.per_fold = cv.at("per_fold").get<std::vector<double>>();
    m.svm = classify::parse_model(j.at("svm").dump());
    if (m.svm.dimension() != m.selection.chosen.size()) {
      fail(ErrorCode::Format, "model: selection and svm dimension disagree");
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("model: ") + e.what());
  }
}

std::string format_evaluation(const TrainedModel& model, const EvaluationResult& eval) {
  json j;
  j["config_hash"] = model.config_hash;
  j["train_rows"] = model.train_rows;
  j["eval_rows"] = eval.eval_rows;
  j["train_accuracy"] = model.train_accuracy;
  j["cross_validation"] = cv_json(model.cv);
  j["holdout_accuracy"] = eval.holdout_accuracy;
  j["selection"] = selection_json(model.selection);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::vector<std::string> write_plotdata(const MergedRecording& raw, const PipelineConfig& config,
                                        const std::filesystem::path& out_dir) {
  const PipelineResult r = run_pipeline(raw, config);
  std::vector<std::string> written;
  json files = json::array();
  auto emit = [&](const std::string& name, const std::string& body, const std::string& figure,
                  std::vector<std::string> columns) {
    text::write_file(out_dir / name, body);
    written.push_back(name);
    files.push_back({{"file", name}, {"figure", figure}, {"columns", columns}});
  };

  {
    std::string s = "index,t,raw_shoulder,ssa_shoulder,raw_elbow,ssa_elbow,raw_wrist,ssa_wrist\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
      s += std::to_string(i) + ",";
      text::append_double(s, raw.t[i]);
      for (std::size_t c = 0; c < ingest::kAngleChannels; ++c) {
        s.push_back(',');
        text::append_double(s, raw.angles[c][i]);
        s.push_back(',');
        text::append_double(s, r.preprocessed.angles[c][i]);
      }
      s.push_back('\n');
    }
    emit("angles.csv", s, "raw vs SSA-reconstructed joint angles",
         {"index", "t", "raw_shoulder", "ssa_shoulder", "raw_elbow", "ssa_elbow", "raw_wrist", "ssa_wrist"});
  }
  for (const auto& o : r.outcomes) {
    if (!o.report.ok && o.profile.size() == 0) continue;
    const auto norm = matching::normalize_profile(o.profile.distances);
    const auto depth1 = o.profile.size() ? matching::detect_local_minima(o.profile, config.mdtw.threshold, 1)
                                         : std::vector<std::size_t>{};
    std::vector<char> m1(o.profile.size(), 0), mall(o.profile.size(), 0);
    for (auto i : depth1) m1[i] = 1;
    for (auto i : o.minima) mall[i] = 1;
    std::string s = "position,distance,normalized,minimum_depth1,minimum\n";
    for (std::size_t p = 0; p < o.profile.size(); ++p) {
      s += std::to_string(o.profile.positions[p]) + ",";
      text::append_double(s, o.profile.distances[p]);
      s.push_back(',');
      text::append_double(s, norm[p]);
      s += m1[p] ? ",1" : ",0";
      s += mall[p] ? ",1\n" : ",0\n";
    }
    emit("distance_" + o.report.action + ".csv", s, "distance vector with detected minima",
         {"position", "distance", "normalized", "minimum_depth1", "minimum"});
  }
  emit("segments.csv", matching::format_segments(r.segments), "extracted segments",
       {"action", "start_index", "end_index", "dtw_distance"});
  {
    std::vector<std::string> label(raw.size());
    for (const auto& seg : r.segments) {
      for (std::size_t i = seg.start_index; i < seg.end_index; ++i) label[i] = seg.action_name;
    }
    std::string s = "index,t,elbow,ch1,ch2,ch3,ch4,ch5,label\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
      s += std::to_string(i) + ",";
      text::append_double(s, raw.t[i]);
      s.push_back(',');
      text::append_double(s, r.preprocessed.angles[ingest::kElbow][i]);
      for (std::size_t c = 0; c < ingest::kEmgChannels; ++c) {
        s.push_back(',');
        text::append_double(s, r.preprocessed.emg[c][i]);
      }
      s += "," + label[i] + "\n";
    }
    emit("labeled.csv", s, "labeled angle and EMG streams",
         {"index", "t", "elbow", "ch1", "ch2", "ch3", "ch4", "ch5", "label"});
  }
  json manifest;
  manifest["schema"] = "emglabel.plotdata";
  manifest["version"] = kPlotDataVersion;
  manifest["config_hash"] = r.report.config_hash;
  manifest["files"] = std::move(files);
  text::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  written.push_back("manifest.json");
  return written;
}

}  // namespace emglabel::pipeline
