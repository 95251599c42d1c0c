/* Copyright 2026 The HDRP-SNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface of the hdrp shared library.
 *
 * Handles are opaque and owned by the caller: free them with the matching
 * *_free function. Every function returning hdrp_status leaves a message for
 * hdrp_last_error() (per thread) when it fails. Strings returned through
 * char** out-parameters are allocated by the library and released with
 * hdrp_string_free(). */

#ifndef HDRP_HDRP_H_
#define HDRP_HDRP_H_

#include <stddef.h>

#if defined(_WIN32)
#  if defined(HDRP_BUILDING_LIBRARY)
#    define HDRP_API __declspec(dllexport)
#  else
#    define HDRP_API __declspec(dllimport)
#  endif
#else
#  define HDRP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hdrp_status {
  HDRP_OK = 0,
  HDRP_ERR_INTERNAL = 1,
  HDRP_ERR_CONFIG = 2,
  HDRP_ERR_VALIDATION = 3,
  HDRP_ERR_IO = 4,
  HDRP_ERR_SHAPE = 5,
  HDRP_ERR_FORMAT = 6,
  HDRP_ERR_NUMERIC = 7,
  HDRP_ERR_DATA = 8,
  HDRP_ERR_ARGUMENT = 9
} hdrp_status;

typedef struct hdrp_experiment hdrp_experiment;
typedef struct hdrp_model hdrp_model;

HDRP_API const char* hdrp_version(void);
/* Message of the last failure on this thread ("" if none). */
HDRP_API const char* hdrp_last_error(void);
HDRP_API void hdrp_string_free(char* s);

/* ---- experiments ---- */

HDRP_API hdrp_status hdrp_experiment_create_default(hdrp_experiment** out);
/* Reads a JSON config file. */
HDRP_API hdrp_status hdrp_experiment_load(const char* path, hdrp_experiment** out);
/* Parses a JSON config string. */
HDRP_API hdrp_status hdrp_experiment_parse(const char* json, hdrp_experiment** out);
/* Config file (or the defaults when path is NULL) with "dotted.key=value"
 * overrides applied together before validation. */
HDRP_API hdrp_status hdrp_experiment_create(const char* path, const char* const* overrides,
                                            size_t num_overrides, hdrp_experiment** out);
/* Overrides one dotted key, e.g. ("optimizer.eta", "0.1"). The value is
 * parsed as JSON, falling back to a plain string. */
HDRP_API hdrp_status hdrp_experiment_set(hdrp_experiment* exp, const char* key,
                                         const char* value);
/* Resolved config as JSON. */
HDRP_API hdrp_status hdrp_experiment_resolved(const hdrp_experiment* exp, char** json);
HDRP_API void hdrp_experiment_free(hdrp_experiment* exp);

/* Runs "train", "eval", "ablate", "noise-sweep", "energy-report" or
 * "grad-check". report_json (optional) receives the report; a grad-check
 * disagreement returns HDRP_ERR_VALIDATION with the report still filled. */
HDRP_API hdrp_status hdrp_run(hdrp_experiment* exp, const char* command, char** report_json);

/* ---- models ---- */

/* Freshly initialized network per the experiment's config and seed. */
HDRP_API hdrp_status hdrp_model_build(const hdrp_experiment* exp, hdrp_model** out);
HDRP_API hdrp_status hdrp_model_load(const hdrp_experiment* exp, const char* checkpoint,
                                     hdrp_model** out);
HDRP_API hdrp_status hdrp_model_save(const hdrp_model* model, const char* checkpoint);
HDRP_API size_t hdrp_model_input_size(const hdrp_model* model);
HDRP_API size_t hdrp_model_num_classes(const hdrp_model* model);
HDRP_API size_t hdrp_model_timesteps(const hdrp_model* model);
/* One sample in, logits out; sizes must equal input_size / num_classes. */
HDRP_API hdrp_status hdrp_model_forward(const hdrp_model* model, const double* input,
                                        size_t input_size, double* logits, size_t num_classes);
HDRP_API hdrp_status hdrp_model_predict(const hdrp_model* model, const double* input,
                                        size_t input_size, size_t* label);
HDRP_API void hdrp_model_free(hdrp_model* model);

/* ---- energy ---- */

/* (macs * e_mac_pj + acs * e_ac_pj) * 1e-6. */
HDRP_API double hdrp_sop_energy_uj(double acs, double macs, double e_mac_pj, double e_ac_pj);

#ifdef __cplusplus
}
#endif

#endif  /* HDRP_HDRP_H_ */
