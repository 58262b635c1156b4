/* Copyright 2026 The vidanno Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the vidanno annotation pipeline. All functions return a
 * vidanno_status; on failure vidanno_last_error() describes the cause for the
 * calling thread. Strings returned through char** outputs are owned by the
 * caller and released with vidanno_string_free().
 */
#ifndef VIDANNO_VIDANNO_H_
#define VIDANNO_VIDANNO_H_

#include <stddef.h>

#if defined(_WIN32)
#define VIDANNO_API __declspec(dllexport)
#elif defined(VIDANNO_BUILDING_LIBRARY)
#define VIDANNO_API __attribute__((visibility("default")))
#else
#define VIDANNO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vidanno_status {
  VIDANNO_OK = 0,
  VIDANNO_INVALID_ARGUMENT = 1,
  VIDANNO_IO_ERROR = 2,
  VIDANNO_FORMAT_ERROR = 3,
  VIDANNO_NOT_FOUND = 4,
  VIDANNO_STATE_ERROR = 5,
  VIDANNO_INTERNAL_ERROR = 6
} vidanno_status;

typedef enum vidanno_source {
  VIDANNO_SOURCE_MANUAL = 0,
  VIDANNO_SOURCE_FORWARD = 1,
  VIDANNO_SOURCE_BACKWARD = 2,
  VIDANNO_SOURCE_FAILURE = 3
} vidanno_source;

typedef struct vidanno_config vidanno_config;
typedef struct vidanno_report vidanno_report;
typedef struct vidanno_annotations vidanno_annotations;

VIDANNO_API const char* vidanno_version(void);
VIDANNO_API const char* vidanno_status_string(vidanno_status status);
/* Message of the last failed call on this thread; empty after a success. */
VIDANNO_API const char* vidanno_last_error(void);
VIDANNO_API void vidanno_string_free(char* s);

/* level 0: progress, 1: warning. NULL restores printing to stderr. */
typedef void (*vidanno_log_fn)(int level, const char* message, void* user);
VIDANNO_API void vidanno_set_log_callback(vidanno_log_fn fn, void* user);

/* Run configuration. */
VIDANNO_API vidanno_status vidanno_config_create(vidanno_config** out);
VIDANNO_API void vidanno_config_destroy(vidanno_config* cfg);
VIDANNO_API vidanno_status vidanno_config_load(vidanno_config* cfg, const char* path);
VIDANNO_API vidanno_status vidanno_config_set(vidanno_config* cfg, const char* key, const char* value);
/* "key=value" */
VIDANNO_API vidanno_status vidanno_config_apply(vidanno_config* cfg, const char* assignment);
VIDANNO_API vidanno_status vidanno_config_get(const vidanno_config* cfg, const char* key, char** value);
VIDANNO_API vidanno_status vidanno_config_dump(const vidanno_config* cfg, char** text);
VIDANNO_API vidanno_status vidanno_config_validate(const vidanno_config* cfg);

/* Stages. `summary` may be NULL; otherwise it receives a short text summary. */
VIDANNO_API vidanno_status vidanno_synth(const vidanno_config* cfg, char** summary);
VIDANNO_API vidanno_status vidanno_split(const vidanno_config* cfg, char** summary);
VIDANNO_API vidanno_status vidanno_train_assess(const vidanno_config* cfg, char** summary);
VIDANNO_API vidanno_status vidanno_train_refine(const vidanno_config* cfg, char** summary);
VIDANNO_API vidanno_status vidanno_annotate(const vidanno_config* cfg, char** summary);
VIDANNO_API vidanno_status vidanno_eval(const vidanno_config* cfg, vidanno_report** report);
/* Writes the ablation table and plots; `table` receives the table text. */
VIDANNO_API vidanno_status vidanno_report_stage(const vidanno_config* cfg, char** table);

/* Evaluation reports. Keys: miou, acc@<t> (e.g. acc@0.5), err_rate,
 * manual_fraction, labor_reduction, frame_count, evaluated, manual, failures. */
VIDANNO_API vidanno_status vidanno_report_get(const vidanno_report* report, const char* key, double* value);
VIDANNO_API vidanno_status vidanno_report_format(const vidanno_report* report, char** text);
VIDANNO_API void vidanno_report_destroy(vidanno_report* report);

/* Annotation files. */
VIDANNO_API vidanno_status vidanno_annotations_read(const char* path, vidanno_annotations** out);
VIDANNO_API void vidanno_annotations_destroy(vidanno_annotations* ann);
VIDANNO_API vidanno_status vidanno_annotations_count(const vidanno_annotations* ann, size_t* count);
/* box: x_min, y_min, x_max, y_max. has_box / has_quality may be NULL. */
VIDANNO_API vidanno_status vidanno_annotations_record(const vidanno_annotations* ann, size_t index, int* frame_idx,
                                                      vidanno_source* source, double box[4], int* has_box,
                                                      double* quality, int* has_quality);
/* Evaluates against a ground-truth annotation file at the given Acc
 * thresholds (NULL/0 for the defaults 0.5 and 0.7). */
VIDANNO_API vidanno_status vidanno_annotations_evaluate(const vidanno_annotations* ann, const char* ground_truth_path,
                                                        const double* thresholds, size_t threshold_count,
                                                        vidanno_report** report);

/* Scalar helpers. Boxes are x_min, y_min, x_max, y_max. */
VIDANNO_API vidanno_status vidanno_iou(const double a[4], const double b[4], double* out);
VIDANNO_API vidanno_status vidanno_quality_from_iou(double iou, double alpha, double beta, double* out);
VIDANNO_API vidanno_status vidanno_labor_reduction(int manual, int failures, int frame_count, double* out);

#ifdef __cplusplus
}
#endif

#endif /* VIDANNO_VIDANNO_H_ */
