// Copyright (c) 2026 The ptq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/calibration.hpp"
#include "core/energy.hpp"
#include "core/graph.hpp"
#include "core/metrics.hpp"
#include "core/model_io.hpp"

namespace ptq {

// Calibration pass: folds BN, places the full (QRes) set of quantization
// sites, streams `samples` random inputs, and snapshots per-site statistics.
// The profile keeps percentiles for each requested k plus k=100.
CalibrationProfile make_profile(const ModelGraph& float_model,
                                const Dataset& ds, int64_t samples,
                                uint64_t seed,
                                const std::vector<double>& percentile_ks,
                                uint64_t reservoir_capacity =
                                    kDefaultReservoirCapacity);

// Full quantization pipeline: fold, insert quantization nodes, resolve
// activation scales from the profile, fake-quantize weights.
ModelGraph build_quantized(const ModelGraph& float_model,
                           const CalibrationProfile& profile,
                           const QuantPlan& plan);

// Evaluation. When float_logits is provided, agreement is the argmax match
// fraction against them; otherwise it falls back to top-1 (identical on
// fixture datasets, whose labels are the float model's own argmax).
ExperimentRecord evaluate_quantized_graph(const ModelGraph& qg,
                                          const Dataset& ds,
                                          const EnergyModel& em,
                                          const Tensor* float_logits = nullptr);
ExperimentRecord evaluate_float_graph(const ModelGraph& g, const Dataset& ds,
                                      const EnergyModel& em);

enum class SweepGrid {
  Full,    // wl_w x wl_a in {4..8}^2, 16 settings each: 400 rows
  Equal68, // wl_w == wl_a in {6,7,8}, 16 settings each: 48 rows
};

// Canonical row order: wl_w, wl_a, wsm, asm, weight group, residual mode.
std::vector<QuantPlan> enumerate_sweep_plans(SweepGrid grid,
                                             double percentile_k = 99.99);

// Runs every plan against the dataset. Row failures are recorded in the
// row's status/error fields and do not stop the sweep. Worker threads only
// change row slots, so output order is canonical regardless of `jobs`.
std::vector<ExperimentRecord> run_sweep(const ModelGraph& float_model,
                                        const Dataset& ds,
                                        const CalibrationProfile& profile,
                                        SweepGrid grid, const EnergyModel& em,
                                        int jobs, double percentile_k = 99.99);

void write_sweep_csv(const std::vector<ExperimentRecord>& records,
                     const std::string& path);
std::vector<ExperimentRecord> read_sweep_csv(const std::string& path);

// sweep.csv + sweep_scatter.csv + sweep_grid.csv + sweep_summary.json.
// Computes acc_diff in place before writing.
void write_sweep_outputs(std::vector<ExperimentRecord>& records,
                         const std::string& out_dir);

// pareto_footprint.csv, pareto_energy.csv, accdiff_<criterion>.csv for the
// four criteria, and report_summary.json.
void write_report_outputs(const std::vector<ExperimentRecord>& records,
                          const std::string& out_dir);

// Single-record JSON (full per-layer / per-site maps plus the optional
// per-technology memory-access energy, reported separately from MAC energy).
void write_eval_json(const ExperimentRecord& rec, const ModelGraph& g,
                     const EnergyModel& em, const std::string& path);

} // namespace ptq
