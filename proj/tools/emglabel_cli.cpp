#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emglabel/emglabel.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct Failure {
  emgl_status status;
  std::string message;
};

int exit_code_for(emgl_status s) {
  switch (s) {
    case EMGL_CONFIG:
    case EMGL_INVALID_PARAMETER:
    case EMGL_NULL_ARGUMENT:
      return kExitUsage;
    default:
      return kExitData;
  }
}

void check(emgl_status s) {
  if (s != EMGL_OK) throw Failure{s, emgl_last_error()};
}

void report_error(const std::string& code, const std::string& message, int exit_code) {
  json j;
  j["error"] = code;
  j["message"] = message;
  j["exit_code"] = exit_code;
  std::cerr << j.dump() << "\n";
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<emgl_config, Deleter<emgl_config, emgl_config_free>>;
using Recording = std::unique_ptr<emgl_recording, Deleter<emgl_recording, emgl_recording_free>>;
using Segments = std::unique_ptr<emgl_segments, Deleter<emgl_segments, emgl_segments_free>>;
using Dataset = std::unique_ptr<emgl_dataset, Deleter<emgl_dataset, emgl_dataset_free>>;
using Features = std::unique_ptr<emgl_features, Deleter<emgl_features, emgl_features_free>>;
using Model = std::unique_ptr<emgl_model, Deleter<emgl_model, emgl_model_free>>;

std::string take(char* s) {
  std::string out = s ? s : "";
  emgl_string_free(s);
  return out;
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--config", a.path, "Pipeline config (JSON)")->required();
  cmd->add_option("--set", a.overrides, "Override a config key, e.g. mdtw.threshold=0.4");
  cmd->add_option("--seed", a.seed, "Override the config seed");
}

Config load_config(const ConfigArgs& a) {
  emgl_config* raw = nullptr;
  check(emgl_config_load(a.path.c_str(), &raw));
  Config cfg(raw);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Failure{EMGL_CONFIG, "--set expects key=value, got '" + kv + "'"};
    }
    const std::string value = kv.substr(eq + 1);
    const json parsed = json::parse(value, nullptr, false);
    const std::string literal = parsed.is_discarded() ? json(value).dump() : parsed.dump();
    check(emgl_config_set(cfg.get(), kv.substr(0, eq).c_str(), literal.c_str()));
  }
  if (a.seed) check(emgl_config_set(cfg.get(), "seed", std::to_string(*a.seed).c_str()));
  return cfg;
}

Recording load_recording(const std::string& path) {
  emgl_recording* r = nullptr;
  check(emgl_recording_load(path.c_str(), &r));
  return Recording(r);
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Failure{EMGL_IO, "cannot write " + path};
}

std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

bool report_ok(const std::string& report) { return json::parse(report).at("ok").get<bool>(); }

std::string segment_line(const emgl_segment_info* s, size_t buffer_rows) {
  json j;
  j["event"] = "segment";
  j["action"] = s->action;
  j["start_index"] = s->start_index;
  j["end_index"] = s->end_index;
  j["dtw_distance"] = s->dtw_distance;
  j["buffer_rows"] = buffer_rows;
  return j.dump();
}

void print_event(const emgl_segment_info* s, size_t buffer_rows, void*) {
  std::cout << segment_line(s, buffer_rows) << "\n" << std::flush;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic labeling of EMG recordings by template matching on joint angles", "emglabel"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(emgl_version()));

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic recording, ground truth and config");
  emgl_synth_params sp;
  emgl_synth_params_default(&sp);
  std::string synth_out, synth_truth, synth_config, synth_actions = "bicep_curl";
  synth->add_option("--out", synth_out, "Recording CSV")->required();
  synth->add_option("--truth", synth_truth, "Ground truth CSV (default <out>.truth.csv)");
  synth->add_option("--config-out", synth_config, "Config JSON (default <out>.config.json)");
  synth->add_option("--actions", synth_actions, "Comma-separated presets: bicep_curl, lateral_raise, wrist_flex")
      ->capture_default_str();
  synth->add_option("--reps", sp.repetitions, "Repetitions per action")->capture_default_str();
  synth->add_option("--seed", sp.seed, "Random seed")->capture_default_str();
  synth->add_option("--noise", sp.angle_noise_deg, "Angle noise sigma in degrees")->capture_default_str();
  synth->add_option("--duration-jitter", sp.duration_jitter)->capture_default_str();
  synth->add_option("--amplitude-jitter", sp.amplitude_jitter)->capture_default_str();
  synth->add_option("--emg-noise", sp.emg_noise)->capture_default_str();
  synth->add_option("--mains", sp.mains_amplitude, "Mains hum amplitude")->capture_default_str();

  // denoise
  auto* denoise = app.add_subcommand("denoise", "Filter EMG and SSA-smooth the joint angles");
  ConfigArgs denoise_cfg;
  std::string denoise_in, denoise_out;
  add_config_options(denoise, denoise_cfg);
  denoise->add_option("--in", denoise_in, "Raw recording CSV")->required();
  denoise->add_option("--out", denoise_out, "Preprocessed recording CSV")->required();

  // segment
  auto* segment = app.add_subcommand("segment", "Find repetitions of every configured action");
  ConfigArgs segment_cfg;
  std::string segment_in, segment_out, segment_dataset, segment_report;
  bool segment_pre = false;
  add_config_options(segment, segment_cfg);
  segment->add_option("--in", segment_in, "Recording CSV")->required();
  segment->add_flag("--preprocessed", segment_pre, "Input was already produced by denoise");
  segment->add_option("--out", segment_out, "Segments CSV (default stdout)");
  segment->add_option("--dataset", segment_dataset, "Also label and write the dataset (JSONL)");
  segment->add_option("--report", segment_report, "Per-action report JSON");

  // label
  auto* label = app.add_subcommand("label", "Cut labeled EMG and angle slices for each segment");
  ConfigArgs label_cfg;
  std::string label_in, label_segments, label_out;
  add_config_options(label, label_cfg);
  label->add_option("--in", label_in, "Preprocessed recording CSV")->required();
  label->add_option("--segments", label_segments, "Segments CSV")->required();
  label->add_option("--out", label_out, "Dataset JSONL")->required();

  // featurize
  auto* featurize = app.add_subcommand("featurize", "Compute the EMG feature matrix of a dataset");
  ConfigArgs feat_cfg;
  std::string feat_in, feat_out;
  add_config_options(featurize, feat_cfg);
  featurize->add_option("--in", feat_in, "Dataset JSONL")->required();
  featurize->add_option("--out", feat_out, "Feature CSV")->required();

  // train
  auto* train = app.add_subcommand("train", "Select features and train the SVM");
  ConfigArgs train_cfg;
  std::string train_in, train_out;
  add_config_options(train, train_cfg);
  train->add_option("--in", train_in, "Feature CSV")->required();
  train->add_option("--out", train_out, "Model JSON")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on its held-out split");
  std::string eval_model, eval_in, eval_out;
  evaluate->add_option("--model", eval_model, "Model JSON")->required();
  evaluate->add_option("--in", eval_in, "Feature CSV the model was trained from")->required();
  evaluate->add_option("--out", eval_out, "Report JSON (default stdout)");

  // listen
  auto* listen = app.add_subcommand("listen", "Merge live angle datagrams with an EMG stream and segment on the fly");
  ConfigArgs listen_cfg;
  std::string listen_emg, listen_replay, listen_out, listen_dataset;
  double listen_speed = 1.0;
  add_config_options(listen, listen_cfg);
  auto* emg_opt = listen->add_option("--emg", listen_emg, "EMG stream CSV t,ch1..ch5");
  auto* replay_opt = listen->add_option("--replay", listen_replay, "Replay a merged recording over loopback UDP");
  emg_opt->excludes(replay_opt);
  listen->add_option("--speed", listen_speed, "Playback speed, 0 = as fast as possible")->capture_default_str();
  listen->add_option("--out", listen_out, "Final segments CSV");
  listen->add_option("--dataset", listen_dataset, "Final dataset JSONL");

  // plotdata
  auto* plot = app.add_subcommand("plotdata", "Write CSV series for external plotting");
  ConfigArgs plot_cfg;
  std::string plot_in, plot_out;
  add_config_options(plot, plot_cfg);
  plot->add_option("--in", plot_in, "Raw recording CSV")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), kExitUsage);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*synth) {
      sp.actions = synth_actions.c_str();
      const std::string truth = synth_truth.empty() ? sibling(synth_out, ".truth.csv") : synth_truth;
      const std::string cfg = synth_config.empty() ? sibling(synth_out, ".config.json") : synth_config;
      check(emgl_synthesize_files(&sp, synth_out.c_str(), truth.c_str(), cfg.c_str()));
    } else if (*denoise) {
      const auto cfg = load_config(denoise_cfg);
      const auto raw = load_recording(denoise_in);
      emgl_recording* pre = nullptr;
      check(emgl_preprocess(cfg.get(), raw.get(), &pre));
      Recording owned(pre);
      check(emgl_recording_save(owned.get(), denoise_out.c_str()));
    } else if (*segment) {
      const auto cfg = load_config(segment_cfg);
      auto rec = load_recording(segment_in);
      if (!segment_pre) {
        emgl_recording* pre = nullptr;
        check(emgl_preprocess(cfg.get(), rec.get(), &pre));
        rec.reset(pre);
      }
      emgl_segments* segs = nullptr;
      char* report = nullptr;
      check(emgl_segment(cfg.get(), rec.get(), &segs, &report));
      Segments owned(segs);
      const std::string report_text = take(report);
      if (segment_out.empty()) {
        char* csv = nullptr;
        check(emgl_segments_to_csv(owned.get(), &csv));
        std::cout << take(csv);
      } else {
        check(emgl_segments_save(owned.get(), segment_out.c_str()));
      }
      if (!segment_report.empty()) write_text(segment_report, report_text);
      if (!segment_dataset.empty()) {
        emgl_dataset* ds = nullptr;
        check(emgl_label(cfg.get(), rec.get(), owned.get(), &ds));
        Dataset owned_ds(ds);
        check(emgl_dataset_save(owned_ds.get(), segment_dataset.c_str()));
      }
      if (!report_ok(report_text)) {
        for (const auto& a : json::parse(report_text).at("actions")) {
          if (!a.at("ok").get<bool>()) {
            report_error(a.at("error_code").get<std::string>(),
                         a.at("action").get<std::string>() + ": " + a.at("stage").get<std::string>() + ": " +
                             a.at("error").get<std::string>(),
                         kExitData);
          }
        }
        return kExitData;
      }
    } else if (*label) {
      const auto cfg = load_config(label_cfg);
      const auto rec = load_recording(label_in);
      emgl_segments* segs = nullptr;
      check(emgl_segments_load(label_segments.c_str(), &segs));
      Segments owned(segs);
      emgl_dataset* ds = nullptr;
      check(emgl_label(cfg.get(), rec.get(), owned.get(), &ds));
      Dataset owned_ds(ds);
      check(emgl_dataset_save(owned_ds.get(), label_out.c_str()));
    } else if (*featurize) {
      const auto cfg = load_config(feat_cfg);
      emgl_dataset* ds = nullptr;
      check(emgl_dataset_load(feat_in.c_str(), &ds));
      Dataset owned_ds(ds);
      emgl_features* f = nullptr;
      check(emgl_featurize(cfg.get(), owned_ds.get(), &f));
      Features owned(f);
      check(emgl_features_save(owned.get(), feat_out.c_str()));
    } else if (*train) {
      const auto cfg = load_config(train_cfg);
      emgl_features* f = nullptr;
      check(emgl_features_load(train_in.c_str(), &f));
      Features owned(f);
      emgl_model* m = nullptr;
      char* summary = nullptr;
      check(emgl_train(cfg.get(), owned.get(), &m, &summary));
      Model owned_m(m);
      const json s = json::parse(take(summary));
      check(emgl_model_save(owned_m.get(), train_out.c_str()));
      json brief;
      brief["train_rows"] = s.at("train_rows");
      brief["train_accuracy"] = s.at("train_accuracy");
      brief["cv_mean_accuracy"] = s.at("cross_validation").at("mean_accuracy");
      brief["cv_std_accuracy"] = s.at("cross_validation").at("std_accuracy");
      brief["selected"] = s.at("selection").at("chosen");
      std::cout << brief.dump() << "\n";
    } else if (*evaluate) {
      emgl_model* m = nullptr;
      check(emgl_model_load(eval_model.c_str(), &m));
      Model owned_m(m);
      emgl_features* f = nullptr;
      check(emgl_features_load(eval_in.c_str(), &f));
      Features owned(f);
      char* report = nullptr;
      check(emgl_evaluate(owned_m.get(), owned.get(), &report));
      write_text(eval_out, take(report));
    } else if (*listen) {
      if (listen_emg.empty() && listen_replay.empty()) {
        throw Failure{EMGL_INVALID_PARAMETER, "listen needs --emg or --replay"};
      }
      const auto cfg = load_config(listen_cfg);
      emgl_dataset* ds = nullptr;
      emgl_segments* segs = nullptr;
      char* summary = nullptr;
      if (!listen_replay.empty()) {
        const auto rec = load_recording(listen_replay);
        check(emgl_replay_udp(cfg.get(), rec.get(), listen_speed, print_event, nullptr, &ds, &segs, &summary));
      } else {
        check(emgl_listen_udp(cfg.get(), listen_emg.c_str(), listen_speed, print_event, nullptr, &ds, &segs,
                              &summary));
      }
      Dataset owned_ds(ds);
      Segments owned(segs);
      json s = json::parse(take(summary));
      json line;
      line["event"] = "summary";
      for (auto& [k, v] : s.items()) line[k] = v;
      std::cout << line.dump() << "\n";
      if (!listen_out.empty()) check(emgl_segments_save(owned.get(), listen_out.c_str()));
      if (!listen_dataset.empty()) check(emgl_dataset_save(owned_ds.get(), listen_dataset.c_str()));
    } else if (*plot) {
      const auto cfg = load_config(plot_cfg);
      const auto raw = load_recording(plot_in);
      char* manifest = nullptr;
      check(emgl_plotdata(cfg.get(), raw.get(), plot_out.c_str(), &manifest));
      take(manifest);
    }
  } catch (const Failure& f) {
    const int code = exit_code_for(f.status);
    report_error(emgl_status_name(f.status), f.message, code);
    return code;
  } catch (const std::exception& e) {
    report_error("internal", e.what(), kExitData);
    return kExitData;
  }
  return kExitOk;
}
