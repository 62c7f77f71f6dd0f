/* Copyright 2026 The TOAST Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface of libtoast.
 *
 * All functions return a toast_status. On failure the message is available
 * from toast_last_error() on the calling thread until the next call. Handles
 * are opaque and must be released with the matching *_free function.
 * Matrices are row-major. */

#ifndef TOAST_TOAST_H_
#define TOAST_TOAST_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TOAST_API __declspec(dllexport)
#else
#define TOAST_API __attribute__((visibility("default")))
#endif

typedef enum toast_status {
  TOAST_OK = 0,
  TOAST_ERR_INVALID_ARGUMENT = 1, /* contract violation, null pointer */
  TOAST_ERR_DIMENSION = 2,
  TOAST_ERR_FORMAT = 3,           /* malformed model or dataset file */
  TOAST_ERR_CONFIG = 4,
  TOAST_ERR_IO = 5,
  TOAST_ERR_DIVERGENCE = 6,
  TOAST_ERR_STAGE = 7,            /* pipeline stage failure */
  TOAST_ERR_BUFFER_TOO_SMALL = 8,
  TOAST_ERR_INTERNAL = 99
} toast_status;

typedef struct toast_config toast_config;
typedef struct toast_model toast_model;

typedef void (*toast_log_fn)(const char* message, void* user);

typedef struct toast_metrics {
  uint64_t seed;
  int32_t fast_steps;
  int32_t plan_calls;
  int32_t failed;
  double rms_tracking_error;
  double task_cost;
  double chattering;
  double recovery_time;
  double max_task_error;
  double final_task_error;
  double mean_feedback;
  double planner_ms;
} toast_metrics;

TOAST_API const char* toast_version(void);
TOAST_API const char* toast_last_error(void);
TOAST_API const char* toast_status_name(toast_status status);

/* Messages from long-running calls; NULL disables. Process-wide. */
TOAST_API void toast_set_log_callback(toast_log_fn fn, void* user);

/* ---- configuration ---- */
TOAST_API toast_status toast_config_load(const char* path, toast_config** out);
TOAST_API toast_status toast_config_parse(const char* json_text, toast_config** out);
/* Sets one dotted key to a JSON value, e.g. ("controller.mode", "\"toast\""). */
TOAST_API toast_status toast_config_set(toast_config* cfg, const char* dotted_key,
                                        const char* json_value);
/* Copies the effective config (pretty JSON) into buf. *needed receives the
 * size including the terminator. */
TOAST_API toast_status toast_config_dump(const toast_config* cfg, char* buf, size_t len,
                                         size_t* needed);
/* JSON text of one dotted key of the effective config, same sizing rules as
 * toast_config_dump. */
TOAST_API toast_status toast_config_get(const toast_config* cfg, const char* dotted_key, char* buf,
                                        size_t len, size_t* needed);
/* 16 hex digits plus terminator; len >= 17. */
TOAST_API toast_status toast_config_hash(const toast_config* cfg, char* buf, size_t len);
TOAST_API void toast_config_free(toast_config* cfg);

/* ---- models ---- */
TOAST_API toast_status toast_model_load(const char* path, toast_model** out);
TOAST_API toast_status toast_model_save(const toast_model* model, const char* path);
TOAST_API toast_status toast_model_dims(const toast_model* model, int32_t* state_dim,
                                        int32_t* action_dim, int32_t* history);
/* past_states: history x n_x, past_actions: history x n_u, oldest first.
 * Either may be NULL when history is 0. */
TOAST_API toast_status toast_model_forward(const toast_model* model, const double* state,
                                           const double* action, const double* past_states,
                                           const double* past_actions, double* next_state);
/* a: n_x x n_x, b: n_x x n_u. */
TOAST_API toast_status toast_model_jacobians(const toast_model* model, const double* state,
                                             const double* action, const double* past_states,
                                             const double* past_actions, double* a, double* b);
TOAST_API void toast_model_free(toast_model* model);

/* ---- experiment stages ---- */
/* Collects the config's dataset and writes it as CSV. */
TOAST_API toast_status toast_collect(const toast_config* cfg, const char* dataset_path);
/* Trains on dataset_path (or a freshly collected dataset when NULL). */
TOAST_API toast_status toast_train(const toast_config* cfg, const char* dataset_path,
                                   toast_model** out, double* validation_rmse);
/* Loads or trains the model named by the config. */
TOAST_API toast_status toast_obtain_model(const toast_config* cfg, toast_model** out);
/* One episode; writes episode_<seed>.csv into out_dir when it is non-NULL. */
TOAST_API toast_status toast_run(const toast_config* cfg, const toast_model* model, uint64_t seed,
                                 const char* out_dir, toast_metrics* metrics);
/* The config's compare.modes over its seeds, reports written to out_dir. */
TOAST_API toast_status toast_compare(const toast_config* cfg, const toast_model* model,
                                     const char* out_dir);
TOAST_API toast_status toast_pipeline(const toast_config* cfg, int dry_run);
/* Creates the directory if needed and writes effective_config.{json,hash}. */
TOAST_API toast_status toast_write_effective_config(const toast_config* cfg, const char* dir);

#ifdef __cplusplus
}
#endif

#endif /* TOAST_TOAST_H_ */
