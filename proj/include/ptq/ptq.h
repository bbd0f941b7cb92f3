/* Copyright (c) 2026 The ptq Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
 * implied. See the License for the specific language governing
 * permissions and limitations under the License.
 */

/* C API of the ptq post-training quantization toolkit.
 *
 * All objects are opaque handles created and destroyed by the library.
 * Every fallible call returns a ptq_status; PTQ_OK is 0. On failure,
 * ptq_last_error() returns a thread-local description of the most recent
 * error on the calling thread.
 */

#ifndef PTQ_PTQ_H_
#define PTQ_PTQ_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PTQ_BUILD_SHARED)
#define PTQ_API __declspec(dllexport)
#else
#define PTQ_API __declspec(dllimport)
#endif
#else
#define PTQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ptq_status {
  PTQ_OK = 0,
  PTQ_ERR_INVALID_ARGUMENT = 1,
  PTQ_ERR_IO = 2,
  PTQ_ERR_FORMAT = 3,
  PTQ_ERR_GRAPH = 4,
  PTQ_ERR_DEGENERATE = 5,
  PTQ_ERR_INCOMPATIBLE = 6,
  PTQ_ERR_STATE = 7,
  PTQ_ERR_INTERNAL = 8,
} ptq_status;

PTQ_API const char* ptq_status_name(ptq_status status);
PTQ_API const char* ptq_last_error(void);
PTQ_API const char* ptq_version(void);

typedef struct ptq_model ptq_model;
typedef struct ptq_dataset ptq_dataset;
typedef struct ptq_profile ptq_profile;
typedef struct ptq_energy_model ptq_energy_model;

typedef enum ptq_scale_method {
  PTQ_SCALE_ABSMAX = 0,
  PTQ_SCALE_ABSP = 1,
  PTQ_SCALE_LSQ = 2,
  PTQ_SCALE_LSQPLUS = 3,
  PTQ_SCALE_BATCHQUANT = 4,
} ptq_scale_method;

typedef enum ptq_weight_group {
  PTQ_GROUP_CHANNEL = 0,
  PTQ_GROUP_LAYER = 1,
} ptq_weight_group;

typedef enum ptq_residual_mode {
  PTQ_RESIDUAL_FP = 0,
  PTQ_RESIDUAL_Q = 1,
} ptq_residual_mode;

typedef struct ptq_plan {
  int wl_w;                      /* weight word-length, 1..16 */
  int wl_a;                      /* activation word-length, 1..16 */
  ptq_scale_method weight_method;
  ptq_scale_method act_method;
  ptq_weight_group weight_group;
  ptq_residual_mode residual;
  double percentile_k;           /* AbsP hyperparameter, default 99.99 */
} ptq_plan;

typedef struct ptq_fixture_spec {
  uint64_t seed;
  int input_c, input_h, input_w;
  const int* widths; /* channel width per residual block */
  int num_blocks;    /* 1..4 */
  int classes;
  int dataset_size;
  int heavy_tailed;  /* nonzero adds 1% x10 weight outliers */
} ptq_fixture_spec;

typedef struct ptq_eval_summary {
  double top1;
  double agreement_with_float;
  double weight_mse_mean;
  double act_mse_mean;
  double footprint_bytes;
  double energy_joules;
  uint64_t macs;
} ptq_eval_summary;

typedef enum ptq_sweep_grid {
  PTQ_SWEEP_FULL = 0,    /* wl 4..8 x 4..8, 16 settings each: 400 rows */
  PTQ_SWEEP_EQUAL68 = 1, /* equal wl 6..8, 16 settings each: 48 rows */
} ptq_sweep_grid;

/* --- models ------------------------------------------------------------- */

PTQ_API ptq_status ptq_model_load(const char* manifest_path, ptq_model** out);
PTQ_API ptq_status ptq_model_save(const ptq_model* model,
                                  const char* manifest_path);
PTQ_API void ptq_model_free(ptq_model* model);
PTQ_API int ptq_model_is_quantized(const ptq_model* model);

/* --- datasets ------------------------------------------------------------ */

PTQ_API ptq_status ptq_dataset_load(const char* path, int require_labels,
                                    ptq_dataset** out);
PTQ_API void ptq_dataset_free(ptq_dataset* dataset);
PTQ_API int64_t ptq_dataset_size(const ptq_dataset* dataset);

/* --- fixtures ------------------------------------------------------------ */

/* Writes model.ptqm/.ptqt, dataset.ptqt(.labels) and golden.ptqt. */
PTQ_API ptq_status ptq_fixture_generate(const ptq_fixture_spec* spec,
                                        const char* out_dir);

/* --- calibration ---------------------------------------------------------- */

PTQ_API ptq_status ptq_calibrate(const ptq_model* model,
                                 const ptq_dataset* dataset, int64_t samples,
                                 uint64_t seed, double percentile_k,
                                 ptq_profile** out);
PTQ_API ptq_status ptq_profile_save(const ptq_profile* profile,
                                    const char* path);
PTQ_API ptq_status ptq_profile_load(const char* path, ptq_profile** out);
PTQ_API void ptq_profile_free(ptq_profile* profile);

/* --- quantization ---------------------------------------------------------- */

PTQ_API ptq_status ptq_quantize(const ptq_model* float_model,
                                const ptq_profile* profile,
                                const ptq_plan* plan, ptq_model** out);

/* --- energy model ---------------------------------------------------------- */

PTQ_API ptq_status ptq_energy_model_default(ptq_energy_model** out);
PTQ_API ptq_status ptq_energy_model_load(const char* path,
                                         ptq_energy_model** out);
PTQ_API ptq_status ptq_energy_model_save(const ptq_energy_model* model,
                                         const char* path);
PTQ_API void ptq_energy_model_free(ptq_energy_model* model);

/* --- evaluation ------------------------------------------------------------ */

/* Evaluates `model` (float or quantized) on a labeled dataset. When
 * out_json_path is non-NULL, the full record (per-layer weight MSE, per-site
 * activation MSE, memory-access energies) is written there. */
PTQ_API ptq_status ptq_evaluate(const ptq_model* model,
                                const ptq_dataset* dataset,
                                const ptq_energy_model* energy,
                                const char* out_json_path,
                                ptq_eval_summary* out_summary);

/* Quantizes float_model with plan+profile in memory, evaluates it, and also
 * reports agreement against the float model's own predictions. */
PTQ_API ptq_status ptq_evaluate_plan(const ptq_model* float_model,
                                     const ptq_dataset* dataset,
                                     const ptq_profile* profile,
                                     const ptq_plan* plan,
                                     const ptq_energy_model* energy,
                                     const char* out_json_path,
                                     ptq_eval_summary* out_summary);

/* --- sweep & report --------------------------------------------------------- */

/* Runs the whole grid and writes sweep.csv, sweep_scatter.csv,
 * sweep_grid.csv and sweep_summary.json into out_dir. Row failures are
 * recorded in the rows themselves; the call only fails on setup errors. */
PTQ_API ptq_status ptq_sweep(const ptq_model* float_model,
                             const ptq_dataset* dataset,
                             const ptq_profile* profile, ptq_sweep_grid grid,
                             const ptq_energy_model* energy, int jobs,
                             double percentile_k, const char* out_dir);

/* Reads a sweep.csv and writes Pareto fronts (footprint and energy axes),
 * per-criterion acc_diff histogram data, and report_summary.json. */
PTQ_API ptq_status ptq_report(const char* sweep_csv, const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PTQ_PTQ_H_ */
