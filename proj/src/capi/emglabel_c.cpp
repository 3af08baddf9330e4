#define EMGL_BUILDING
#include "emglabel/emglabel.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <json.hpp>
#include <new>
#include <string>

#include "emglabel/error.hpp"
#include "emglabel/features.hpp"
#include "emglabel/ingest.hpp"
#include "emglabel/live.hpp"
#include "emglabel/matching.hpp"
#include "emglabel/pipeline.hpp"
#include "text.hpp"

using namespace emglabel;

struct emgl_config {
  pipeline::PipelineConfig value;
};
struct emgl_recording {
  ingest::MergedRecording value;
};
struct emgl_segments {
  std::vector<matching::Segment> value;
};
struct emgl_dataset {
  matching::LabeledDataset value;
};
struct emgl_features {
  features::FeatureMatrix value;
};
struct emgl_model {
  pipeline::TrainedModel value;
};
struct emgl_live {
  explicit emgl_live(pipeline::PipelineConfig c) : segmenter(std::move(c)) {}
  live::LiveSegmenter segmenter;
  bool finished = false;
};

namespace {

thread_local std::string g_last_error;

class NullArgument : public std::exception {
 public:
  explicit NullArgument(const char* name) : message_(std::string("null argument: ") + name) {}
  const char* what() const noexcept override { return message_.c_str(); }

 private:
  std::string message_;
};

template <typename F>
emgl_status guard(F&& f) noexcept {
  try {
    g_last_error.clear();
    f();
    return EMGL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<emgl_status>(static_cast<int>(e.code()));
  } catch (const NullArgument& e) {
    g_last_error = e.what();
    return EMGL_NULL_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EMGL_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EMGL_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return EMGL_INTERNAL;
  }
}

template <typename T>
T& need(T* p, const char* name) {
  if (!p) throw NullArgument(name);
  return *p;
}

const char* need_str(const char* p, const char* name) {
  if (!p) throw NullArgument(name);
  return p;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void set_string(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

template <typename H, typename V>
void set_handle(H** out, V&& value) {
  if (out) *out = new H{std::forward<V>(value)};
}

ingest::SyntheticSpec synth_spec(const emgl_synth_params& p) {
  ingest::SyntheticSpec spec;
  if (p.actions && *p.actions) {
    for (const auto& name : text::split(p.actions, ',')) {
      spec.actions.push_back(ingest::action_preset(text::trim(name)));
    }
  }
  spec.repetitions = p.repetitions;
  spec.angle_noise_deg = p.angle_noise_deg;
  spec.duration_jitter = p.duration_jitter;
  spec.amplitude_jitter = p.amplitude_jitter;
  spec.emg_noise = p.emg_noise;
  spec.mains_amplitude = p.mains_amplitude;
  spec.seed = p.seed;
  return spec;
}

void fill_info(const matching::Segment& s, emgl_segment_info* out) {
  out->action = s.action_name.c_str();
  out->start_index = s.start_index;
  out->end_index = s.end_index;
  out->dtw_distance = s.dtw_distance;
}

live::EventCallback wrap_callback(emgl_segment_callback cb, void* user) {
  if (!cb) return {};
  return [cb, user](const live::LiveEvent& e) {
    emgl_segment_info info{};
    fill_info(e.segment, &info);
    cb(&info, e.buffer_rows, user);
  };
}

void emit_listen(live::ListenResult&& r, emgl_dataset** dataset, emgl_segments** segments, char** summary) {
  set_string(summary, live::format_listen_summary(r));
  set_handle(segments, std::move(r.result.segments));
  set_handle(dataset, std::move(r.result.dataset));
}

}  // namespace

extern "C" {

const char* emgl_version(void) { return "1.0.0"; }

const char* emgl_status_name(emgl_status status) {
  switch (status) {
    case EMGL_OK: return "ok";
    case EMGL_NULL_ARGUMENT: return "null_argument";
    case EMGL_INTERNAL: return "internal";
    default:
      if (status >= 1 && status <= 15) return error_code_name(static_cast<ErrorCode>(status));
      return "unknown";
  }
}

const char* emgl_last_error(void) { return g_last_error.c_str(); }

void emgl_string_free(char* s) { std::free(s); }

emgl_status emgl_config_load(const char* path, emgl_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_config{pipeline::load_config(need_str(path, "path"))};
  });
}

emgl_status emgl_config_parse(const char* json, const char* base_dir, emgl_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_config{pipeline::parse_config(need_str(json, "json"), base_dir ? base_dir : "")};
  });
}

emgl_status emgl_config_set(emgl_config* config, const char* key, const char* value_json) {
  return guard([&] {
    auto& c = need(config, "config");
    pipeline::set_config_value(c.value, need_str(key, "key"), need_str(value_json, "value_json"));
  });
}

emgl_status emgl_config_to_json(const emgl_config* config, char** out) {
  return guard([&] { need(out, "out") = dup_string(pipeline::config_to_json(need(config, "config").value)); });
}

emgl_status emgl_config_hash(const emgl_config* config, char** out) {
  return guard([&] { need(out, "out") = dup_string(pipeline::config_hash(need(config, "config").value)); });
}

void emgl_config_free(emgl_config* config) { delete config; }

emgl_status emgl_recording_load(const char* path, emgl_recording** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_recording{ingest::parse_recording(need_str(path, "path"))};
  });
}

emgl_status emgl_recording_save(const emgl_recording* recording, const char* path) {
  return guard([&] { ingest::write_recording(need(recording, "recording").value, need_str(path, "path")); });
}

emgl_status emgl_recording_from_rows(const double* rows, size_t n_rows, emgl_recording** out) {
  return guard([&] {
    need(out, "out");
    if (n_rows > 0) need(rows, "rows");
    ingest::MergedRecording r;
    r.reserve(n_rows);
    for (size_t i = 0; i < n_rows; ++i) {
      const double* row = rows + i * EMGL_RECORDING_COLUMNS;
      r.push_row(row[0], std::span<const double>(row + 1, 5), std::span<const double>(row + 6, 3));
    }
    r.validate();
    *out = new emgl_recording{std::move(r)};
  });
}

size_t emgl_recording_rows(const emgl_recording* recording) { return recording ? recording->value.size() : 0; }

emgl_status emgl_recording_row(const emgl_recording* recording, size_t index, double out[EMGL_RECORDING_COLUMNS]) {
  return guard([&] {
    const auto& r = need(recording, "recording").value;
    need(out, "out");
    if (index >= r.size()) fail(ErrorCode::InvalidParameter, "row index out of range");
    out[0] = r.t[index];
    for (size_t c = 0; c < 5; ++c) out[1 + c] = r.emg[c][index];
    for (size_t c = 0; c < 3; ++c) out[6 + c] = r.angles[c][index];
  });
}

void emgl_recording_free(emgl_recording* recording) { delete recording; }

void emgl_synth_params_default(emgl_synth_params* params) {
  if (!params) return;
  const ingest::SyntheticSpec spec;
  params->actions = nullptr;
  params->repetitions = spec.repetitions;
  params->angle_noise_deg = spec.angle_noise_deg;
  params->duration_jitter = spec.duration_jitter;
  params->amplitude_jitter = spec.amplitude_jitter;
  params->emg_noise = spec.emg_noise;
  params->mains_amplitude = spec.mains_amplitude;
  params->seed = spec.seed;
}

emgl_status emgl_synthesize(const emgl_synth_params* params, emgl_recording** recording, char** truth_csv) {
  return guard([&] {
    auto syn = ingest::generate_synthetic(synth_spec(need(params, "params")));
    set_string(truth_csv, ingest::format_ground_truth(syn.truth));
    set_handle(recording, std::move(syn.recording));
  });
}

emgl_status emgl_synthesize_files(const emgl_synth_params* params, const char* recording_path,
                                  const char* truth_path, const char* config_path) {
  return guard([&] {
    const auto syn = ingest::generate_synthetic(synth_spec(need(params, "params")));
    ingest::write_recording(syn.recording, need_str(recording_path, "recording_path"));
    if (truth_path) text::write_file(truth_path, ingest::format_ground_truth(syn.truth));
    if (config_path) {
      const std::filesystem::path cfg_path(config_path);
      pipeline::PipelineConfig cfg;
      cfg.seed = params->seed;
      for (const auto& t : syn.truth) {
        pipeline::ActionConfig a;
        a.name = t.action_name;
        a.expected_count = params->repetitions;
        a.template_samples = t.template_series.samples;
        cfg.actions.push_back(a);
      }
      pipeline::validate_config(cfg);
      auto j = nlohmann::ordered_json::parse(pipeline::config_to_json(cfg));
      for (std::size_t i = 0; i < syn.truth.size(); ++i) {
        const std::string rel = "templates/" + syn.truth[i].action_name + ".csv";
        text::write_file(cfg_path.parent_path() / rel, ingest::format_template(syn.truth[i].template_series));
        auto& ja = j["actions"][i];
        ja.erase("template_samples");
        ja["template"] = rel;
      }
      text::write_file(cfg_path, j.dump(2) + "\n");
    }
  });
}

emgl_status emgl_preprocess(const emgl_config* config, const emgl_recording* raw, emgl_recording** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_recording{pipeline::preprocess(need(raw, "raw").value, need(config, "config").value)};
  });
}

emgl_status emgl_segment(const emgl_config* config, const emgl_recording* preprocessed, emgl_segments** out,
                         char** report_json) {
  return guard([&] {
    need(out, "out");
    const auto& cfg = need(config, "config").value;
    const auto& rec = need(preprocessed, "preprocessed").value;
    rec.validate();
    const auto outcomes = pipeline::segment_recording(rec, cfg);
    pipeline::PipelineReport report;
    report.config_hash = pipeline::config_hash(cfg);
    report.rows = rec.size();
    std::vector<matching::Segment> segs;
    for (const auto& o : outcomes) {
      report.actions.push_back(o.report);
      segs.insert(segs.end(), o.segments.begin(), o.segments.end());
    }
    set_string(report_json, pipeline::format_report(report));
    *out = new emgl_segments{std::move(segs)};
  });
}

emgl_status emgl_label(const emgl_config* config, const emgl_recording* preprocessed, const emgl_segments* segments,
                       emgl_dataset** out) {
  return guard([&] {
    need(out, "out");
    const auto& rec = need(preprocessed, "preprocessed").value;
    rec.validate();
    *out = new emgl_dataset{
        pipeline::label_recording(need(segments, "segments").value, rec, need(config, "config").value)};
  });
}

emgl_status emgl_run_pipeline(const emgl_config* config, const emgl_recording* raw, emgl_dataset** dataset,
                              emgl_segments** segments, char** report_json) {
  return guard([&] {
    need(dataset, "dataset");
    auto r = pipeline::run_pipeline(need(raw, "raw").value, need(config, "config").value);
    set_string(report_json, pipeline::format_report(r.report));
    set_handle(segments, std::move(r.segments));
    set_handle(dataset, std::move(r.dataset));
  });
}

emgl_status emgl_plotdata(const emgl_config* config, const emgl_recording* raw, const char* out_dir,
                          char** manifest_json) {
  return guard([&] {
    const std::filesystem::path dir(need_str(out_dir, "out_dir"));
    pipeline::write_plotdata(need(raw, "raw").value, need(config, "config").value, dir);
    if (manifest_json) *manifest_json = dup_string(text::read_file(dir / "manifest.json"));
  });
}

emgl_status emgl_segments_load(const char* path, emgl_segments** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_segments{matching::parse_segments(text::read_file(need_str(path, "path")))};
  });
}

emgl_status emgl_segments_save(const emgl_segments* segments, const char* path) {
  return guard([&] {
    text::write_file(need_str(path, "path"), matching::format_segments(need(segments, "segments").value));
  });
}

emgl_status emgl_segments_to_csv(const emgl_segments* segments, char** out) {
  return guard([&] { need(out, "out") = dup_string(matching::format_segments(need(segments, "segments").value)); });
}

size_t emgl_segments_count(const emgl_segments* segments) { return segments ? segments->value.size() : 0; }

emgl_status emgl_segments_get(const emgl_segments* segments, size_t index, emgl_segment_info* out) {
  return guard([&] {
    const auto& v = need(segments, "segments").value;
    need(out, "out");
    if (index >= v.size()) fail(ErrorCode::InvalidParameter, "segment index out of range");
    fill_info(v[index], out);
  });
}

void emgl_segments_free(emgl_segments* segments) { delete segments; }

emgl_status emgl_dataset_load(const char* path, emgl_dataset** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_dataset{matching::read_dataset(need_str(path, "path"))};
  });
}

emgl_status emgl_dataset_save(const emgl_dataset* dataset, const char* path) {
  return guard([&] { matching::write_dataset(need(dataset, "dataset").value, need_str(path, "path")); });
}

size_t emgl_dataset_size(const emgl_dataset* dataset) { return dataset ? dataset->value.size() : 0; }

void emgl_dataset_free(emgl_dataset* dataset) { delete dataset; }

emgl_status emgl_featurize(const emgl_config* config, const emgl_dataset* dataset, emgl_features** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_features{pipeline::featurize(need(dataset, "dataset").value, need(config, "config").value)};
  });
}

emgl_status emgl_features_load(const char* path, emgl_features** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_features{features::parse_feature_matrix(text::read_file(need_str(path, "path")))};
  });
}

emgl_status emgl_features_save(const emgl_features* f, const char* path) {
  return guard([&] {
    text::write_file(need_str(path, "path"), features::format_feature_matrix(need(f, "features").value));
  });
}

size_t emgl_features_rows(const emgl_features* f) { return f ? f->value.row_count() : 0; }
size_t emgl_features_cols(const emgl_features* f) { return f ? f->value.column_count() : 0; }
void emgl_features_free(emgl_features* f) { delete f; }

emgl_status emgl_train(const emgl_config* config, const emgl_features* f, emgl_model** out, char** summary_json) {
  return guard([&] {
    need(out, "out");
    auto m = pipeline::train(need(f, "features").value, need(config, "config").value);
    set_string(summary_json, pipeline::format_trained_model(m));
    *out = new emgl_model{std::move(m)};
  });
}

emgl_status emgl_evaluate(const emgl_model* model, const emgl_features* f, char** report_json) {
  return guard([&] {
    need(report_json, "report_json");
    const auto& m = need(model, "model").value;
    const auto eval = pipeline::evaluate_holdout(m, need(f, "features").value);
    *report_json = dup_string(pipeline::format_evaluation(m, eval));
  });
}

emgl_status emgl_model_predict(const emgl_model* model, const emgl_features* f, size_t row, char** label) {
  return guard([&] {
    need(label, "label");
    const auto& m = need(model, "model").value;
    const auto& fm = need(f, "features").value;
    if (row >= fm.row_count()) fail(ErrorCode::InvalidParameter, "feature row out of range");
    const auto reduced = features::apply_selection(fm.select_rows(std::vector<std::size_t>{row}), m.selection);
    *label = dup_string(classify::svm_predict(m.svm, reduced.rows[0]).label);
  });
}

emgl_status emgl_model_load(const char* path, emgl_model** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_model{pipeline::parse_trained_model(text::read_file(need_str(path, "path")))};
  });
}

emgl_status emgl_model_save(const emgl_model* model, const char* path) {
  return guard([&] {
    text::write_file(need_str(path, "path"), pipeline::format_trained_model(need(model, "model").value));
  });
}

void emgl_model_free(emgl_model* model) { delete model; }

emgl_status emgl_live_create(const emgl_config* config, emgl_live** out) {
  return guard([&] {
    need(out, "out");
    *out = new emgl_live(need(config, "config").value);
  });
}

emgl_status emgl_live_push(emgl_live* l, const emgl_recording* rows) {
  return guard([&] {
    auto& lv = need(l, "live");
    if (lv.finished) fail(ErrorCode::InvalidInput, "live session already finished");
    lv.segmenter.push(need(rows, "rows").value);
  });
}

emgl_status emgl_live_poll(emgl_live* l, emgl_segment_callback callback, void* user) {
  return guard([&] {
    const auto events = need(l, "live").segmenter.take_events();
    const auto cb = wrap_callback(callback, user);
    if (cb) {
      for (const auto& e : events) cb(e);
    }
  });
}

emgl_status emgl_live_finish(emgl_live* l, emgl_dataset** dataset, emgl_segments** segments) {
  return guard([&] {
    auto& lv = need(l, "live");
    if (lv.finished) fail(ErrorCode::InvalidInput, "live session already finished");
    lv.finished = true;
    auto r = lv.segmenter.finish();
    set_handle(segments, std::move(r.segments));
    set_handle(dataset, std::move(r.dataset));
  });
}

void emgl_live_free(emgl_live* l) { delete l; }

emgl_status emgl_listen_udp(const emgl_config* config, const char* emg_path, double speed,
                            emgl_segment_callback callback, void* user, emgl_dataset** dataset,
                            emgl_segments** segments, char** summary_json) {
  return guard([&] {
    auto r = live::listen_udp(need(config, "config").value, need_str(emg_path, "emg_path"), speed,
                              wrap_callback(callback, user));
    emit_listen(std::move(r), dataset, segments, summary_json);
  });
}

emgl_status emgl_replay_udp(const emgl_config* config, const emgl_recording* recording, double speed,
                            emgl_segment_callback callback, void* user, emgl_dataset** dataset,
                            emgl_segments** segments, char** summary_json) {
  return guard([&] {
    auto r = live::replay_udp(need(recording, "recording").value, need(config, "config").value, speed,
                              wrap_callback(callback, user));
    emit_listen(std::move(r), dataset, segments, summary_json);
  });
}

emgl_status emgl_emg_stream_save(const emgl_recording* recording, const char* path) {
  return guard([&] {
    text::write_file(need_str(path, "path"), live::format_emg_stream(need(recording, "recording").value));
  });
}

emgl_status emgl_packet_decode(const char* payload, size_t len, double out[4], int* clamped) {
  return guard([&] {
    need(out, "out");
    if (len > 0) need_str(payload, "payload");
    const auto p = ingest::decode_angle_packet(std::string_view(payload ? payload : "", len));
    out[0] = p.frame.t;
    out[1] = p.frame.shoulder_deg;
    out[2] = p.frame.elbow_deg;
    out[3] = p.frame.wrist_deg;
    if (clamped) *clamped = p.clamped ? 1 : 0;
  });
}

emgl_status emgl_packet_encode(const double frame[4], char** out) {
  return guard([&] {
    need(frame, "frame");
    need(out, "out") = dup_string(ingest::encode_angle_packet({frame[0], frame[1], frame[2], frame[3]}));
  });
}

}  // extern "C"
