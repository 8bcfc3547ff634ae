// Copyright 2026 The otrlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OTRLAB_OTRLAB_H_
#define OTRLAB_OTRLAB_H_

/* C interface to otrlab. Every function returns an otrlab_status; on failure
 * otrlab_last_error() describes the problem (per thread, valid until the next
 * call on that thread). Strings returned through char** are owned by the
 * caller and released with otrlab_string_free. Handles are opaque. */

#include <stddef.h>
#include <stdint.h>

#if defined(OTRLAB_BUILDING)
#define OTRLAB_API __attribute__((visibility("default")))
#else
#define OTRLAB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum otrlab_status {
  OTRLAB_OK = 0,
  OTRLAB_ERR_DIMENSION = 1,
  OTRLAB_ERR_NUMERICAL = 2,
  OTRLAB_ERR_SIZE = 3,
  OTRLAB_ERR_STATE = 4,
  OTRLAB_ERR_CONTRACT = 5,
  OTRLAB_ERR_CONFIG = 6,
  OTRLAB_ERR_DATA = 7,
  OTRLAB_ERR_IO = 8,
  OTRLAB_ERR_LABELING = 9,
  OTRLAB_ERR_ARGUMENT = 10,
  OTRLAB_ERR_INTERNAL = 11
} otrlab_status;

typedef struct otrlab_config otrlab_config;
typedef struct otrlab_policy otrlab_policy;
typedef struct otrlab_dataset otrlab_dataset;

typedef void (*otrlab_log_fn)(const char* line, void* user);

OTRLAB_API const char* otrlab_version(void);
OTRLAB_API const char* otrlab_last_error(void);
OTRLAB_API const char* otrlab_status_name(otrlab_status status);
/* Process exit status for a failure class (0 for OTRLAB_OK). */
OTRLAB_API int otrlab_exit_code(otrlab_status status);
OTRLAB_API void otrlab_string_free(char* s);

/* Configuration. profile is "desk" or "full". */
OTRLAB_API otrlab_status otrlab_config_new(const char* profile, otrlab_config** out);
OTRLAB_API otrlab_status otrlab_config_load(const char* path, otrlab_config** out);
OTRLAB_API otrlab_status otrlab_config_parse(const char* json_text, otrlab_config** out);
/* Dotted key ("iql.gradient_steps"); value is JSON, bare words are strings. */
OTRLAB_API otrlab_status otrlab_config_set(otrlab_config* config, const char* key,
                                           const char* value);
OTRLAB_API otrlab_status otrlab_config_json(const otrlab_config* config, char** json_out);
OTRLAB_API void otrlab_config_free(otrlab_config* config);

/* Datasets. */
typedef struct otrlab_dataset_info {
  int episode_count;
  int state_dim;
  int action_dim;
  int horizon;
  int has_rewards;
  char reward_status[16];
} otrlab_dataset_info;

OTRLAB_API otrlab_status otrlab_dataset_read(const char* path, otrlab_dataset** out);
OTRLAB_API otrlab_status otrlab_dataset_info_get(const otrlab_dataset* dataset,
                                                 otrlab_dataset_info* info);
/* Human-readable manifest plus a return histogram when ground truth or
 * labels are available. */
OTRLAB_API otrlab_status otrlab_dataset_describe(const otrlab_dataset* dataset, const char* path,
                                                 char** text_out);
OTRLAB_API otrlab_status otrlab_dataset_export_json(const otrlab_dataset* dataset,
                                                    char** json_out);
OTRLAB_API void otrlab_dataset_free(otrlab_dataset* dataset);

/* Pipeline steps. Paths are dataset bases with or without suffix. */
OTRLAB_API otrlab_status otrlab_generate(const otrlab_config* config, const char* expert_base,
                                         const char* unlabeled_base, double* expert_mean,
                                         double* behavior_mean);
/* *was_noop is set when the input was already stripped (may be NULL). */
OTRLAB_API otrlab_status otrlab_strip(const char* in_path, const char* out_base, int* was_noop);
OTRLAB_API otrlab_status otrlab_label(const otrlab_config* config, const char* expert_path,
                                      const char* unlabeled_path, const char* out_base,
                                      const char* report_path, int* labeled_count);
OTRLAB_API otrlab_status otrlab_train(const otrlab_config* config, const char* labeled_path,
                                      const char* out_dir, uint64_t seed, otrlab_log_fn log,
                                      void* user);

typedef struct otrlab_eval_record {
  uint64_t seed;
  int episodes;
  double return_mean;
  double return_std;
  double episode_steps_mean;
  double normalized_return;
  int all_full_horizon;
} otrlab_eval_record;

/* source is "expert", "random" or a policy checkpoint path. json_out may be
 * NULL; otherwise it receives the record with per-episode values. */
OTRLAB_API otrlab_status otrlab_evaluate(const otrlab_config* config, const char* source,
                                         int episodes, uint64_t seed, otrlab_eval_record* out,
                                         char** json_out);
/* Writes ground-truth rollouts to out_base and, when svg_path is non-NULL,
 * the path plot. *mean_distance may be NULL. */
OTRLAB_API otrlab_status otrlab_rollout(const otrlab_config* config, const char* source,
                                        int episodes, uint64_t seed, const char* out_base,
                                        const char* svg_path, double* mean_distance);
/* One panel per episode across all given datasets. */
OTRLAB_API otrlab_status otrlab_render_paths(const char* const* dataset_paths, size_t count,
                                             const char* svg_path, double* mean_distance);
OTRLAB_API otrlab_status otrlab_aggregate(const char* const* metrics_csvs, size_t count,
                                          const char* out_path);
OTRLAB_API otrlab_status otrlab_report(const char* const* aggregate_csvs, size_t count,
                                       char** text_out);

typedef struct otrlab_run_summary {
  int stages_run;
  int stages_skipped;
  int seeds_evaluated;
  double mean_normalized_return;
  double std_normalized_return;
  double behavior_mean_normalized_return;
  int all_full_horizon;
} otrlab_run_summary;

OTRLAB_API otrlab_status otrlab_run(const otrlab_config* config, otrlab_run_summary* out,
                                    otrlab_log_fn log, void* user);

/* Policies. */
OTRLAB_API otrlab_status otrlab_policy_load(const char* path, otrlab_policy** out);
OTRLAB_API otrlab_status otrlab_policy_dims(const otrlab_policy* policy, int* state_dim,
                                            int* action_dim);
/* Deterministic action; action must hold action_dim values. */
OTRLAB_API otrlab_status otrlab_policy_act(const otrlab_policy* policy, const double* state,
                                           size_t state_len, double* action, size_t action_len);
OTRLAB_API void otrlab_policy_free(otrlab_policy* policy);

#ifdef __cplusplus
}
#endif

#endif /* OTRLAB_OTRLAB_H_ */
