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

#include "ptq/ptq.h"

#include <string>

#include "core/calibration.hpp"
#include "core/energy.hpp"
#include "core/engine.hpp"
#include "core/error.hpp"
#include "core/fixtures.hpp"
#include "core/graph.hpp"
#include "core/model_io.hpp"
#include "core/report.hpp"

struct ptq_model {
  ptq::ModelGraph graph;
};
struct ptq_dataset {
  ptq::Dataset data;
};
struct ptq_profile {
  ptq::CalibrationProfile profile;
};
struct ptq_energy_model {
  ptq::EnergyModel model;
};

namespace {

thread_local std::string g_last_error;

ptq_status status_of(ptq::ErrorCode code) {
  switch (code) {
    case ptq::ErrorCode::InvalidArgument: return PTQ_ERR_INVALID_ARGUMENT;
    case ptq::ErrorCode::Io: return PTQ_ERR_IO;
    case ptq::ErrorCode::Format: return PTQ_ERR_FORMAT;
    case ptq::ErrorCode::Graph: return PTQ_ERR_GRAPH;
    case ptq::ErrorCode::Degenerate: return PTQ_ERR_DEGENERATE;
    case ptq::ErrorCode::Incompatible: return PTQ_ERR_INCOMPATIBLE;
    case ptq::ErrorCode::State: return PTQ_ERR_STATE;
    case ptq::ErrorCode::Internal: return PTQ_ERR_INTERNAL;
  }
  return PTQ_ERR_INTERNAL;
}

template <typename Fn>
ptq_status guarded(Fn&& fn) {
  try {
    fn();
    return PTQ_OK;
  } catch (const ptq::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PTQ_ERR_INTERNAL;
  }
}

ptq_status invalid(const char* msg) {
  g_last_error = msg;
  return PTQ_ERR_INVALID_ARGUMENT;
}

ptq::ScaleMethod::Kind to_kind(ptq_scale_method m) {
  switch (m) {
    case PTQ_SCALE_ABSMAX: return ptq::ScaleMethod::Kind::AbsMax;
    case PTQ_SCALE_ABSP: return ptq::ScaleMethod::Kind::AbsP;
    case PTQ_SCALE_LSQ: return ptq::ScaleMethod::Kind::LSQ;
    case PTQ_SCALE_LSQPLUS: return ptq::ScaleMethod::Kind::LSQPlus;
    case PTQ_SCALE_BATCHQUANT: return ptq::ScaleMethod::Kind::BatchQuant;
  }
  ptq::fail(ptq::ErrorCode::InvalidArgument, "bad scale method enum");
}

ptq::QuantPlan to_plan(const ptq_plan& p) {
  ptq::QuantPlan plan;
  plan.wl_w = p.wl_w;
  plan.wl_a = p.wl_a;
  plan.weight_method = {to_kind(p.weight_method), p.percentile_k};
  plan.act_method = {to_kind(p.act_method), p.percentile_k};
  plan.weight_group = p.weight_group == PTQ_GROUP_CHANNEL
                          ? ptq::AxisGroup::per_channel(0)
                          : ptq::AxisGroup::whole();
  plan.residual = p.residual == PTQ_RESIDUAL_Q ? ptq::ResidualMode::QRes
                                               : ptq::ResidualMode::FpRes;
  plan.validate();
  return plan;
}

void fill_summary(const ptq::ExperimentRecord& rec, ptq_eval_summary* out) {
  if (!out) return;
  out->top1 = rec.top1;
  out->agreement_with_float = rec.agreement_with_float;
  out->weight_mse_mean = rec.weight_mse_mean;
  out->act_mse_mean = rec.act_mse_mean;
  out->footprint_bytes = rec.footprint_bytes;
  out->energy_joules = rec.energy_joules;
  out->macs = rec.macs;
}

} // namespace

extern "C" {

const char* ptq_status_name(ptq_status status) {
  switch (status) {
    case PTQ_OK: return "ok";
    case PTQ_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case PTQ_ERR_IO: return "io";
    case PTQ_ERR_FORMAT: return "format";
    case PTQ_ERR_GRAPH: return "graph";
    case PTQ_ERR_DEGENERATE: return "degenerate";
    case PTQ_ERR_INCOMPATIBLE: return "incompatible";
    case PTQ_ERR_STATE: return "state";
    case PTQ_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ptq_last_error(void) { return g_last_error.c_str(); }

const char* ptq_version(void) { return "0.1.0"; }

ptq_status ptq_model_load(const char* manifest_path, ptq_model** out) {
  if (!manifest_path || !out) return invalid("null argument");
  return guarded([&] {
    auto m = new ptq_model{ptq::load_model(manifest_path)};
    *out = m;
  });
}

ptq_status ptq_model_save(const ptq_model* model, const char* manifest_path) {
  if (!model || !manifest_path) return invalid("null argument");
  return guarded([&] { ptq::save_model(model->graph, manifest_path); });
}

void ptq_model_free(ptq_model* model) { delete model; }

int ptq_model_is_quantized(const ptq_model* model) {
  return model && model->graph.quantized ? 1 : 0;
}

ptq_status ptq_dataset_load(const char* path, int require_labels,
                            ptq_dataset** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    auto d = new ptq_dataset{ptq::load_dataset(path, require_labels != 0)};
    *out = d;
  });
}

void ptq_dataset_free(ptq_dataset* dataset) { delete dataset; }

int64_t ptq_dataset_size(const ptq_dataset* dataset) {
  return dataset ? dataset->data.images.dim(0) : 0;
}

ptq_status ptq_fixture_generate(const ptq_fixture_spec* spec,
                                const char* out_dir) {
  if (!spec || !out_dir) return invalid("null argument");
  if (!spec->widths || spec->num_blocks < 1)
    return invalid("fixture widths missing");
  return guarded([&] {
    ptq::FixtureSpec s;
    s.seed = spec->seed;
    s.in_c = spec->input_c;
    s.in_h = spec->input_h;
    s.in_w = spec->input_w;
    s.widths.assign(spec->widths, spec->widths + spec->num_blocks);
    s.classes = spec->classes;
    s.dataset_size = spec->dataset_size;
    s.heavy_tailed = spec->heavy_tailed != 0;
    ptq::write_fixture_files(s, out_dir);
  });
}

ptq_status ptq_calibrate(const ptq_model* model, const ptq_dataset* dataset,
                         int64_t samples, uint64_t seed, double percentile_k,
                         ptq_profile** out) {
  if (!model || !dataset || !out) return invalid("null argument");
  return guarded([&] {
    auto p = new ptq_profile{ptq::make_profile(
        model->graph, dataset->data, samples, seed, {percentile_k})};
    *out = p;
  });
}

ptq_status ptq_profile_save(const ptq_profile* profile, const char* path) {
  if (!profile || !path) return invalid("null argument");
  return guarded([&] { profile->profile.save(path); });
}

ptq_status ptq_profile_load(const char* path, ptq_profile** out) {
  if (!path || !out) return invalid("null argument");
  return guarded([&] {
    auto p = new ptq_profile{ptq::CalibrationProfile::load(path)};
    *out = p;
  });
}

void ptq_profile_free(ptq_profile* profile) { delete profile; }

ptq_status ptq_quantize(const ptq_model* float_model,
                        const ptq_profile* profile, const ptq_plan* plan,
                        ptq_model** out) {
  if (!float_model || !profile || !plan || !out)
    return invalid("null argument");
  return guarded([&] {
    if (float_model->graph.quantized || float_model->graph.has_quant_nodes())
      ptq::fail(ptq::ErrorCode::State, "model is already quantized");
    auto m = new ptq_model{ptq::build_quantized(
        float_model->graph, profile->profile, to_plan(*plan))};
    *out = m;
  });
}

ptq_status ptq_energy_model_default(ptq_energy_model** out) {
  if (!out) return invalid("null argument");
  return guarded(
      [&] { *out = new ptq_energy_model{ptq::EnergyModel::builtin_default()}; });
}

ptq_status ptq_energy_model_load(const char* path, ptq_energy_model** out) {
  if (!path || !out) return invalid("null argument");
  return guarded(
      [&] { *out = new ptq_energy_model{ptq::EnergyModel::load(path)}; });
}

ptq_status ptq_energy_model_save(const ptq_energy_model* model,
                                 const char* path) {
  if (!model || !path) return invalid("null argument");
  return guarded([&] { model->model.save(path); });
}

void ptq_energy_model_free(ptq_energy_model* model) { delete model; }

ptq_status ptq_evaluate(const ptq_model* model, const ptq_dataset* dataset,
                        const ptq_energy_model* energy,
                        const char* out_json_path,
                        ptq_eval_summary* out_summary) {
  if (!model || !dataset || !energy) return invalid("null argument");
  return guarded([&] {
    const ptq::ExperimentRecord rec =
        model->graph.quantized
            ? ptq::evaluate_quantized_graph(model->graph, dataset->data,
                                            energy->model)
            : ptq::evaluate_float_graph(model->graph, dataset->data,
                                        energy->model);
    if (out_json_path)
      ptq::write_eval_json(rec, model->graph, energy->model, out_json_path);
    fill_summary(rec, out_summary);
  });
}

ptq_status ptq_evaluate_plan(const ptq_model* float_model,
                             const ptq_dataset* dataset,
                             const ptq_profile* profile, const ptq_plan* plan,
                             const ptq_energy_model* energy,
                             const char* out_json_path,
                             ptq_eval_summary* out_summary) {
  if (!float_model || !dataset || !profile || !plan || !energy)
    return invalid("null argument");
  return guarded([&] {
    const ptq::ModelGraph qg = ptq::build_quantized(
        float_model->graph, profile->profile, to_plan(*plan));
    const ptq::Tensor float_logits = ptq::forward_all(
        float_model->graph, dataset->data.images, ptq::ExecMode::Float);
    const ptq::ExperimentRecord rec = ptq::evaluate_quantized_graph(
        qg, dataset->data, energy->model, &float_logits);
    if (out_json_path)
      ptq::write_eval_json(rec, qg, energy->model, out_json_path);
    fill_summary(rec, out_summary);
  });
}

ptq_status ptq_sweep(const ptq_model* float_model, const ptq_dataset* dataset,
                     const ptq_profile* profile, ptq_sweep_grid grid,
                     const ptq_energy_model* energy, int jobs,
                     double percentile_k, const char* out_dir) {
  if (!float_model || !dataset || !profile || !energy || !out_dir)
    return invalid("null argument");
  return guarded([&] {
    auto records = ptq::run_sweep(
        float_model->graph, dataset->data, profile->profile,
        grid == PTQ_SWEEP_FULL ? ptq::SweepGrid::Full : ptq::SweepGrid::Equal68,
        energy->model, jobs, percentile_k);
    ptq::write_sweep_outputs(records, out_dir);
  });
}

ptq_status ptq_report(const char* sweep_csv, const char* out_dir) {
  if (!sweep_csv || !out_dir) return invalid("null argument");
  return guarded([&] {
    const auto records = ptq::read_sweep_csv(sweep_csv);
    ptq::write_report_outputs(records, out_dir);
  });
}

} // extern "C"
