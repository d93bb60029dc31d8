/* Copyright 2026 The spde-lab Authors
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

/* C interface to the spde-lab core.
 *
 * The library is consumed through an opaque run handle: create it from a
 * JSON configuration, execute it, read the summary, destroy it. All
 * functions are safe to call from multiple threads as long as a single
 * handle is confined to one thread at a time. Error messages are
 * thread-local; read spde_last_error() on the thread that observed the
 * failure.
 */

#ifndef SPDELAB_H_
#define SPDELAB_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes. */
typedef enum spde_status {
  SPDE_OK = 0,
  SPDE_ERROR_CONFIG = 2,  /* malformed or contradictory configuration */
  SPDE_ERROR_COMPUTE = 3, /* blow-up, insufficient coverage, overflow */
  SPDE_ERROR_IO = 4       /* filesystem failures */
} spde_status;

typedef struct spde_run spde_run;

/* Library version as "major.minor.patch". Static storage; do not free. */
const char* spde_version(void);

/* Message for the most recent failure on the calling thread, or an empty
 * string. Valid until the next failing call on the same thread. */
const char* spde_last_error(void);

/* Parses and validates a JSON configuration. On success stores a new run
 * handle in *out_run; the caller owns it and must destroy it. On failure
 * *out_run is NULL and the status names the failing layer. A configuration
 * that parses here is runnable: grid and coefficient constraints are
 * checked eagerly. */
spde_status spde_run_create(const char* config_json, spde_run** out_run);

/* Runs the configured experiment, writing artifacts into the configured
 * output directory. Blocks until the run completes. May be called again;
 * each call re-runs the experiment and replaces the summary. */
spde_status spde_run_execute(spde_run* run);

/* Summary JSON of the most recent successful execute, or NULL if the run
 * has not executed. Owned by the handle; valid until the next
 * spde_run_execute or spde_run_destroy on it. */
const char* spde_run_summary_json(const spde_run* run);

/* Serialized form of the run's configuration with every default filled
 * in. Owned by the handle; valid until spde_run_destroy. */
const char* spde_run_config_json(const spde_run* run);

/* Releases the handle. NULL is allowed. */
void spde_run_destroy(spde_run* run);

/* Reshapes a summary JSON document into tidy plot series
 * ("series,replication,functional,x,y"). On success *out_csv receives a
 * NUL-terminated buffer owned by the caller; release it with
 * spde_string_free. */
spde_status spde_plot_data_from_summary(const char* summary_json,
                                        char** out_csv);

/* Frees a buffer returned through an out-parameter of this API. */
void spde_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPDELAB_H_ */
