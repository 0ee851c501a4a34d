// Copyright 2026 The lidarmt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the lidarmt library. Every function returns an
 * lmt_status; on failure lmt_last_error() describes the most recent error
 * on the calling thread. Handles are opaque and owned by the caller. */

#ifndef LIDARMT_LIDARMT_H_
#define LIDARMT_LIDARMT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(LMT_BUILDING_LIBRARY)
#    define LMT_API __declspec(dllexport)
#  else
#    define LMT_API __declspec(dllimport)
#  endif
#else
#  define LMT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lmt_status {
  LMT_OK = 0,
  LMT_INVALID_ARGUMENT = 1,
  LMT_SHAPE_MISMATCH = 2,
  LMT_IO = 3,
  LMT_FORMAT = 4,
  LMT_VERSION_MISMATCH = 5,
  LMT_CONFIG = 6,
  LMT_CHECKPOINT_MISMATCH = 7,
  LMT_PLACEMENT = 8,
  LMT_DIVERGED = 9,
  LMT_OUT_OF_RANGE = 10,
  LMT_INTERNAL = 11
} lmt_status;

typedef struct lmt_model lmt_model;
typedef struct lmt_dataset lmt_dataset;
typedef struct lmt_text lmt_text;

/* Called once per training epoch with a one-line summary. */
typedef void (*lmt_log_fn)(const char* line, void* user);

LMT_API const char* lmt_version(void);
LMT_API const char* lmt_status_name(lmt_status status);
LMT_API const char* lmt_last_error(void);

/* Datasets. */
LMT_API lmt_status lmt_generate_dataset(const char* spec_path, uint64_t seed_first,
                                        uint64_t seed_last, const char* out_path);
LMT_API lmt_status lmt_dataset_load(const char* path, lmt_dataset** out);
LMT_API size_t lmt_dataset_size(const lmt_dataset* d);
/* Points in the sample's own sweep, excluding stored history sweeps. */
LMT_API size_t lmt_dataset_point_count(const lmt_dataset* d, size_t index);
LMT_API void lmt_dataset_free(lmt_dataset* d);

/* Training writes a checkpoint; diverged runs leave a dump at
 * <out_path>.diverged.txt. */
LMT_API lmt_status lmt_train(const char* config_path, const char* out_path, lmt_log_fn log,
                             void* user);

/* Models. config_path may be NULL; otherwise its model hash must match. */
LMT_API lmt_status lmt_model_load(const char* checkpoint_path, const char* config_path,
                                  lmt_model** out);
LMT_API lmt_status lmt_model_save(const lmt_model* m, const char* checkpoint_path);
LMT_API size_t lmt_model_parameter_count(const lmt_model* m);
LMT_API uint64_t lmt_model_config_hash(const lmt_model* m);
LMT_API void lmt_model_free(lmt_model* m);

/* Labels for the points of sample index of d (history sweeps still feed the
 * model); labels_out holds lmt_dataset_point_count(d, index) entries, 0 for
 * points outside the grid. */
LMT_API lmt_status lmt_segment(const lmt_model* m, const lmt_dataset* d, size_t index,
                               int32_t* labels_out, size_t capacity);

/* Text results. */
/* key_value != 0 selects "name = value" lines instead of "name: value". */
LMT_API lmt_status lmt_evaluate(const lmt_model* m, const lmt_dataset* d, int key_value,
                                lmt_text** report);
LMT_API lmt_status lmt_infer(const lmt_model* m, const lmt_dataset* d, lmt_text** predictions);
LMT_API lmt_status lmt_inspect_offsets(const lmt_model* m, const lmt_dataset* d, size_t index,
                                       double quantile, lmt_text** csv, size_t* rows);
LMT_API const char* lmt_text_data(const lmt_text* t);
LMT_API size_t lmt_text_size(const lmt_text* t);
LMT_API void lmt_text_free(lmt_text* t);

/* Writes text to path. */
LMT_API lmt_status lmt_text_write(const lmt_text* t, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* LIDARMT_LIDARMT_H_ */
