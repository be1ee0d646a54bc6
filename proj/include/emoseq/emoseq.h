/*
 * Copyright 2026 The emoseq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the emoseq library.
 *
 * Conventions:
 *  - Every fallible call returns an emoseq_status. On failure a description
 *    is available from emoseq_last_error() until the next failing call on the
 *    same thread.
 *  - Handles are opaque and owned by the caller; release them with the
 *    matching *_destroy function. Passing NULL to *_destroy is a no-op.
 *  - Strings returned as `char*` are heap-allocated and must be released
 *    with emoseq_string_free(). `const char*` results are borrowed.
 */
#ifndef EMOSEQ_EMOSEQ_H_
#define EMOSEQ_EMOSEQ_H_

#include <stddef.h>
#include <stdint.h>

#if defined(EMOSEQ_BUILDING_LIBRARY)
#define EMOSEQ_API __attribute__((visibility("default")))
#else
#define EMOSEQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emoseq_status {
  EMOSEQ_OK = 0,
  EMOSEQ_ERR_INVALID_ARGUMENT = 1,
  EMOSEQ_ERR_IO = 2,
  EMOSEQ_ERR_MALFORMED_WAV = 3,
  EMOSEQ_ERR_UNSUPPORTED_ENCODING = 4,
  EMOSEQ_ERR_EMPTY_AUDIO = 5,
  EMOSEQ_ERR_NON_FINITE_INPUT = 6,
  EMOSEQ_ERR_TOO_FEW_FRAMES = 7,
  EMOSEQ_ERR_NO_FRAMES = 8,
  EMOSEQ_ERR_INCONSISTENT_DIMENSIONS = 9,
  EMOSEQ_ERR_MALFORMED_IMAGE = 10,
  EMOSEQ_ERR_WRONG_FRAME_SIZE = 11,
  EMOSEQ_ERR_SHAPE_MISMATCH = 12,
  EMOSEQ_ERR_NON_FINITE_VALUE = 13,
  EMOSEQ_ERR_DEGENERATE_BATCH = 14,
  EMOSEQ_ERR_LABEL_OUT_OF_RANGE = 15,
  EMOSEQ_ERR_NON_FINITE_GRADIENT = 16,
  EMOSEQ_ERR_NOT_SCALAR = 17,
  EMOSEQ_ERR_MODEL_NOT_BUILT = 18,
  EMOSEQ_ERR_TOO_FEW_SPEAKERS = 19,
  EMOSEQ_ERR_MISSING_FEATURES = 20,
  EMOSEQ_ERR_NON_FINITE_LOSS = 21,
  EMOSEQ_ERR_EMPTY_SPLIT = 22,
  EMOSEQ_ERR_LENGTH_MISMATCH = 23,
  EMOSEQ_ERR_INDEX_OUT_OF_RANGE = 24,
  EMOSEQ_ERR_ZERO_METRIC_VALUE = 25,
  EMOSEQ_ERR_MALFORMED_FILE = 26,
  EMOSEQ_ERR_UNKNOWN_CONFIG_KEY = 27,
  EMOSEQ_ERR_HEAD_MISMATCH = 28,
  EMOSEQ_ERR_INTERNAL = 100
} emoseq_status;

EMOSEQ_API const char* emoseq_version(void);
EMOSEQ_API const char* emoseq_status_name(emoseq_status status);
/* Message of the most recent failure on this thread ("" if none). */
EMOSEQ_API const char* emoseq_last_error(void);
EMOSEQ_API void emoseq_string_free(char* s);

/* ---- run configuration ------------------------------------------------ */

typedef struct emoseq_config emoseq_config;

/* Precedence, lowest first: built-in defaults, EMOSEQ_SEED, config file,
 * explicit emoseq_config_set() calls. Unknown keys are rejected. */
EMOSEQ_API emoseq_status emoseq_config_create(emoseq_config** out);
EMOSEQ_API void emoseq_config_destroy(emoseq_config* cfg);
EMOSEQ_API emoseq_status emoseq_config_set(emoseq_config* cfg, const char* key, const char* value);
EMOSEQ_API emoseq_status emoseq_config_apply_environment(emoseq_config* cfg);
EMOSEQ_API emoseq_status emoseq_config_load_file(emoseq_config* cfg, const char* path);
/* Borrowed pointer, valid until the key is next modified. */
EMOSEQ_API emoseq_status emoseq_config_get(const emoseq_config* cfg, const char* key,
                                           const char** value);
/* key=value lines; with `annotate` each line names the winning source. */
EMOSEQ_API char* emoseq_config_dump(const emoseq_config* cfg, int annotate);

/* ---- data pipeline ---------------------------------------------------- */

/* Synthetic corpus under out_dir (manifest.csv, audio/, video/). */
EMOSEQ_API emoseq_status emoseq_synthesize(const char* out_dir, uint64_t seed, size_t n_speakers,
                                           size_t clips_per_speaker, size_t* n_clips);
/* Feature caches <cache_dir>/<clip_id>.{audio,video}.emsq for every entry. */
EMOSEQ_API emoseq_status emoseq_extract_audio(const char* manifest, const char* cache_dir,
                                              size_t* n_clips);
EMOSEQ_API emoseq_status emoseq_extract_video(const char* manifest, const char* cache_dir,
                                              size_t* n_clips);
/* Speaker-disjoint split file; speaker_counts receives train/val/test sizes. */
EMOSEQ_API emoseq_status emoseq_split(const char* manifest, size_t n_val, size_t n_test,
                                      uint64_t seed, const char* split_out,
                                      size_t speaker_counts[3]);

/* ---- models ----------------------------------------------------------- */

typedef struct emoseq_model emoseq_model;

/* Architecture, head and initialisation seed are taken from the config. */
EMOSEQ_API emoseq_status emoseq_model_create(const emoseq_config* cfg, emoseq_model** out);
EMOSEQ_API emoseq_status emoseq_model_load(const char* path, emoseq_model** out);
/* Writes the checkpoint and a <stem>.manifest.txt architecture listing. */
EMOSEQ_API emoseq_status emoseq_model_save(emoseq_model* model, const char* path);
EMOSEQ_API void emoseq_model_destroy(emoseq_model* model);
EMOSEQ_API const char* emoseq_model_head(const emoseq_model* model);
EMOSEQ_API size_t emoseq_model_parameter_count(const emoseq_model* model);
EMOSEQ_API char* emoseq_model_describe(const emoseq_model* model);

typedef struct emoseq_epoch {
  size_t epoch; /* 1-based */
  double train_loss;
  double train_acc;
  double val_loss;
  double val_acc;
} emoseq_epoch;

/* Return 0 to stop after this epoch. */
typedef int (*emoseq_epoch_callback)(const emoseq_epoch* epoch, void* user);

/* Trains on the split's train speakers with validation-based early stopping
 * (batch_size, lr, max_epochs, early_stop_patience and seed from cfg). The
 * model ends holding the best validation weights. history_out may be NULL. */
EMOSEQ_API emoseq_status emoseq_train(emoseq_model* model, const emoseq_config* cfg,
                                      const char* manifest, const char* split,
                                      const char* cache_dir, const char* history_out,
                                      emoseq_epoch_callback on_epoch, void* user,
                                      size_t* best_epoch);

/* ---- evaluation reports ----------------------------------------------- */

typedef struct emoseq_report emoseq_report;

/* partition is "train", "val" or "test". */
EMOSEQ_API emoseq_status emoseq_evaluate(emoseq_model* model, const char* manifest,
                                         const char* split, const char* cache_dir,
                                         const char* partition, emoseq_report** out);
EMOSEQ_API emoseq_status emoseq_report_load_csv(const char* path, emoseq_report** out);
EMOSEQ_API emoseq_status emoseq_report_write_csv(const emoseq_report* report, const char* path);
EMOSEQ_API char* emoseq_report_format(const emoseq_report* report);
EMOSEQ_API size_t emoseq_report_class_count(const emoseq_report* report);
EMOSEQ_API emoseq_status emoseq_report_class(const emoseq_report* report, size_t index,
                                             const char** name, double* precision,
                                             double* recall, double* f1, size_t* support);
/* EMOSEQ_ERR_ZERO_METRIC_VALUE when some per-class value is zero. */
EMOSEQ_API emoseq_status emoseq_report_aggregate(const emoseq_report* report, double* precision,
                                                 double* recall, double* f1);
EMOSEQ_API void emoseq_report_destroy(emoseq_report* report);

/* n / sum(1 / v_i); every value must be positive. */
EMOSEQ_API emoseq_status emoseq_harmonic_mean(const double* values, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* EMOSEQ_EMOSEQ_H_ */
