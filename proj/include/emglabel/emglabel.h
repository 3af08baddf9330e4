#ifndef EMGLABEL_H
#define EMGLABEL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(EMGL_BUILDING)
#define EMGL_API __declspec(dllexport)
#else
#define EMGL_API __declspec(dllimport)
#endif
#else
#define EMGL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 1..15 mirror the library error categories. */
typedef enum emgl_status {
  EMGL_OK = 0,
  EMGL_INVALID_PARAMETER = 1,
  EMGL_INVALID_INPUT = 2,
  EMGL_FORMAT = 3,
  EMGL_DATA = 4,
  EMGL_DEGENERATE_GEOMETRY = 5,
  EMGL_PACKET_FORMAT = 6,
  EMGL_UNMERGEABLE = 7,
  EMGL_INSUFFICIENT_DATA = 8,
  EMGL_INSUFFICIENT_BOUNDARIES = 9,
  EMGL_INTERNAL_CONSISTENCY = 10,
  EMGL_NORMALIZATION = 11,
  EMGL_INVALID_TRAINING_SET = 12,
  EMGL_CONVERGENCE = 13,
  EMGL_IO = 14,
  EMGL_CONFIG = 15,
  EMGL_NULL_ARGUMENT = 100,
  EMGL_INTERNAL = 101
} emgl_status;

typedef struct emgl_config emgl_config;
typedef struct emgl_recording emgl_recording;
typedef struct emgl_segments emgl_segments;
typedef struct emgl_dataset emgl_dataset;
typedef struct emgl_features emgl_features;
typedef struct emgl_model emgl_model;
typedef struct emgl_live emgl_live;

/* Recording rows are 9 doubles: t, ch1..ch5, shoulder, elbow, wrist. */
#define EMGL_RECORDING_COLUMNS 9

typedef struct emgl_segment_info {
  const char* action; /* valid while the owning handle lives */
  size_t start_index;
  size_t end_index;   /* exclusive */
  double dtw_distance;
} emgl_segment_info;

typedef struct emgl_synth_params {
  const char* actions; /* comma-separated preset names, NULL = bicep_curl */
  int repetitions;
  double angle_noise_deg;
  double duration_jitter;
  double amplitude_jitter;
  double emg_noise;
  double mains_amplitude;
  uint64_t seed;
} emgl_synth_params;

typedef void (*emgl_segment_callback)(const emgl_segment_info* segment, size_t buffer_rows, void* user);

EMGL_API const char* emgl_version(void);
EMGL_API const char* emgl_status_name(emgl_status status);
/* Message of the last failed call on this thread, "" if none. */
EMGL_API const char* emgl_last_error(void);
EMGL_API void emgl_string_free(char* s);

/* Configuration */
EMGL_API emgl_status emgl_config_load(const char* path, emgl_config** out);
EMGL_API emgl_status emgl_config_parse(const char* json, const char* base_dir, emgl_config** out);
/* value_json is a JSON literal, e.g. "0.4", "true", "\"wrist\"". */
EMGL_API emgl_status emgl_config_set(emgl_config* config, const char* key, const char* value_json);
EMGL_API emgl_status emgl_config_to_json(const emgl_config* config, char** out);
EMGL_API emgl_status emgl_config_hash(const emgl_config* config, char** out);
EMGL_API void emgl_config_free(emgl_config* config);

/* Recordings */
EMGL_API emgl_status emgl_recording_load(const char* path, emgl_recording** out);
EMGL_API emgl_status emgl_recording_save(const emgl_recording* recording, const char* path);
EMGL_API emgl_status emgl_recording_from_rows(const double* rows, size_t n_rows, emgl_recording** out);
EMGL_API size_t emgl_recording_rows(const emgl_recording* recording);
EMGL_API emgl_status emgl_recording_row(const emgl_recording* recording, size_t index,
                                        double out[EMGL_RECORDING_COLUMNS]);
EMGL_API void emgl_recording_free(emgl_recording* recording);

EMGL_API void emgl_synth_params_default(emgl_synth_params* params);
/* truth_csv receives `action,start,end` lines. */
EMGL_API emgl_status emgl_synthesize(const emgl_synth_params* params, emgl_recording** recording,
                                     char** truth_csv);
/* Writes the recording, the ground truth, one template CSV per action under
   <config dir>/templates/ and a config referencing them. */
EMGL_API emgl_status emgl_synthesize_files(const emgl_synth_params* params, const char* recording_path,
                                           const char* truth_path, const char* config_path);

/* Pipeline stages */
EMGL_API emgl_status emgl_preprocess(const emgl_config* config, const emgl_recording* raw,
                                     emgl_recording** out);
/* Segments an already preprocessed recording. Per-action failures are
   reported in report_json (nullable) and do not fail the call. */
EMGL_API emgl_status emgl_segment(const emgl_config* config, const emgl_recording* preprocessed,
                                  emgl_segments** out, char** report_json);
EMGL_API emgl_status emgl_label(const emgl_config* config, const emgl_recording* preprocessed,
                                const emgl_segments* segments, emgl_dataset** out);
/* preprocess, segment and label in one call; segments and report_json are nullable. */
EMGL_API emgl_status emgl_run_pipeline(const emgl_config* config, const emgl_recording* raw,
                                       emgl_dataset** dataset, emgl_segments** segments,
                                       char** report_json);
EMGL_API emgl_status emgl_plotdata(const emgl_config* config, const emgl_recording* raw, const char* out_dir,
                                   char** manifest_json);

EMGL_API emgl_status emgl_segments_load(const char* path, emgl_segments** out);
EMGL_API emgl_status emgl_segments_save(const emgl_segments* segments, const char* path);
EMGL_API emgl_status emgl_segments_to_csv(const emgl_segments* segments, char** out);
EMGL_API size_t emgl_segments_count(const emgl_segments* segments);
EMGL_API emgl_status emgl_segments_get(const emgl_segments* segments, size_t index, emgl_segment_info* out);
EMGL_API void emgl_segments_free(emgl_segments* segments);

EMGL_API emgl_status emgl_dataset_load(const char* path, emgl_dataset** out);
EMGL_API emgl_status emgl_dataset_save(const emgl_dataset* dataset, const char* path);
EMGL_API size_t emgl_dataset_size(const emgl_dataset* dataset);
EMGL_API void emgl_dataset_free(emgl_dataset* dataset);

/* Features and classification */
EMGL_API emgl_status emgl_featurize(const emgl_config* config, const emgl_dataset* dataset,
                                    emgl_features** out);
EMGL_API emgl_status emgl_features_load(const char* path, emgl_features** out);
EMGL_API emgl_status emgl_features_save(const emgl_features* features, const char* path);
EMGL_API size_t emgl_features_rows(const emgl_features* features);
EMGL_API size_t emgl_features_cols(const emgl_features* features);
EMGL_API void emgl_features_free(emgl_features* features);

EMGL_API emgl_status emgl_train(const emgl_config* config, const emgl_features* features, emgl_model** out,
                                char** summary_json);
EMGL_API emgl_status emgl_evaluate(const emgl_model* model, const emgl_features* features, char** report_json);
/* Predicts one full feature row (all columns of the matrix it was trained on). */
EMGL_API emgl_status emgl_model_predict(const emgl_model* model, const emgl_features* features, size_t row,
                                        char** label);
EMGL_API emgl_status emgl_model_load(const char* path, emgl_model** out);
EMGL_API emgl_status emgl_model_save(const emgl_model* model, const char* path);
EMGL_API void emgl_model_free(emgl_model* model);

/* Live segmentation */
EMGL_API emgl_status emgl_live_create(const emgl_config* config, emgl_live** out);
EMGL_API emgl_status emgl_live_push(emgl_live* live, const emgl_recording* rows);
/* Invokes callback for every segment announced since the last poll. */
EMGL_API emgl_status emgl_live_poll(emgl_live* live, emgl_segment_callback callback, void* user);
EMGL_API emgl_status emgl_live_finish(emgl_live* live, emgl_dataset** dataset, emgl_segments** segments);
EMGL_API void emgl_live_free(emgl_live* live);

/* Binds config live.bind/live.port; EMG rows come from a `t,ch1..ch5` CSV.
   dataset, segments and summary_json are nullable. */
EMGL_API emgl_status emgl_listen_udp(const emgl_config* config, const char* emg_path, double speed,
                                     emgl_segment_callback callback, void* user, emgl_dataset** dataset,
                                     emgl_segments** segments, char** summary_json);
EMGL_API emgl_status emgl_replay_udp(const emgl_config* config, const emgl_recording* recording, double speed,
                                     emgl_segment_callback callback, void* user, emgl_dataset** dataset,
                                     emgl_segments** segments, char** summary_json);
EMGL_API emgl_status emgl_emg_stream_save(const emgl_recording* recording, const char* path);

/* Angle datagrams `ts,shoulder,elbow,wrist` */
EMGL_API emgl_status emgl_packet_decode(const char* payload, size_t len, double out[4], int* clamped);
EMGL_API emgl_status emgl_packet_encode(const double frame[4], char** out);

#ifdef __cplusplus
}
#endif

#endif
