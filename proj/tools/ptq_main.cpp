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

// Command-line front end. All functionality is the shared library's; this
// file only parses flags and forwards to the C API.

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptq/ptq.h"

namespace {

struct CliError {
  ptq_status status;
  std::string message;
};

void check(ptq_status status) {
  if (status != PTQ_OK) throw CliError{status, ptq_last_error()};
}

// RAII wrappers over the opaque C handles.
using ModelPtr = std::unique_ptr<ptq_model, decltype(&ptq_model_free)>;
using DatasetPtr = std::unique_ptr<ptq_dataset, decltype(&ptq_dataset_free)>;
using ProfilePtr = std::unique_ptr<ptq_profile, decltype(&ptq_profile_free)>;
using EnergyPtr =
    std::unique_ptr<ptq_energy_model, decltype(&ptq_energy_model_free)>;

ModelPtr load_model(const std::string& path) {
  ptq_model* m = nullptr;
  check(ptq_model_load(path.c_str(), &m));
  return ModelPtr(m, &ptq_model_free);
}

DatasetPtr load_dataset(const std::string& path, bool labels) {
  ptq_dataset* d = nullptr;
  check(ptq_dataset_load(path.c_str(), labels ? 1 : 0, &d));
  return DatasetPtr(d, &ptq_dataset_free);
}

ProfilePtr load_profile(const std::string& path) {
  ptq_profile* p = nullptr;
  check(ptq_profile_load(path.c_str(), &p));
  return ProfilePtr(p, &ptq_profile_free);
}

EnergyPtr load_energy(const std::string& path) {
  ptq_energy_model* e = nullptr;
  if (path.empty()) check(ptq_energy_model_default(&e));
  else check(ptq_energy_model_load(path.c_str(), &e));
  return EnergyPtr(e, &ptq_energy_model_free);
}

ptq_scale_method parse_method(const std::string& name) {
  if (name == "absmax") return PTQ_SCALE_ABSMAX;
  if (name == "absp") return PTQ_SCALE_ABSP;
  if (name == "lsq") return PTQ_SCALE_LSQ;
  if (name == "lsqplus" || name == "lsq+") return PTQ_SCALE_LSQPLUS;
  if (name == "batchquant") return PTQ_SCALE_BATCHQUANT;
  throw CliError{PTQ_ERR_INVALID_ARGUMENT, "unknown scale method: " + name};
}

std::vector<int> parse_int_list(const std::string& s, char sep) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(std::stoi(tok));
  return out;
}

// Shared plan flags.
struct PlanFlags {
  int wl_w = 8;
  int wl_a = 8;
  std::string wsm = "absp";
  std::string asm_name = "absp";
  std::string weight_group = "channel";
  std::string residual = "fpres";
  double percentile_k = 99.99;

  void attach(CLI::App* cmd) {
    cmd->add_option("--wl-w", wl_w, "Weight word-length in bits")
        ->check(CLI::Range(1, 16));
    cmd->add_option("--wl-a", wl_a, "Activation word-length in bits")
        ->check(CLI::Range(1, 16));
    cmd->add_option("--wsm", wsm,
                    "Weight scale method: absmax|absp|lsq|lsqplus");
    cmd->add_option("--asm", asm_name,
                    "Activation scale method: absmax|absp|lsq|batchquant");
    cmd->add_option("--weight-group", weight_group,
                    "Weight scale granularity: channel|layer")
        ->check(CLI::IsMember({"channel", "layer"}));
    cmd->add_option("--residual", residual,
                    "Residual activations: fpres|qres")
        ->check(CLI::IsMember({"fpres", "qres"}));
    cmd->add_option("--percentile-k", percentile_k, "AbsP percentile")
        ->check(CLI::Range(0.0, 100.0));
  }

  ptq_plan plan() const {
    ptq_plan p{};
    p.wl_w = wl_w;
    p.wl_a = wl_a;
    p.weight_method = parse_method(wsm);
    p.act_method = parse_method(asm_name);
    p.weight_group =
        weight_group == "channel" ? PTQ_GROUP_CHANNEL : PTQ_GROUP_LAYER;
    p.residual = residual == "qres" ? PTQ_RESIDUAL_Q : PTQ_RESIDUAL_FP;
    p.percentile_k = percentile_k;
    return p;
  }
};

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

void report_error(const CliError& e) {
  std::fprintf(stderr, "{\"error\":\"%s\",\"message\":\"%s\"}\n",
               ptq_status_name(e.status), json_escape(e.message).c_str());
}

void print_summary(const ptq_eval_summary& s) {
  std::printf("top1                 %.6f\n", s.top1);
  std::printf("agreement_with_float %.6f\n", s.agreement_with_float);
  std::printf("weight_mse_mean      %.9g\n", s.weight_mse_mean);
  std::printf("act_mse_mean         %.9g\n", s.act_mse_mean);
  std::printf("footprint_bytes      %.1f\n", s.footprint_bytes);
  std::printf("energy_joules        %.9g\n", s.energy_joules);
  std::printf("macs                 %llu\n",
              static_cast<unsigned long long>(s.macs));
}

// Flat key-value config file; CLI flags win. Keys are long option names
// without the leading dashes, e.g. "wl-w 8" or "wl-a=6".
std::vector<std::pair<std::string, std::string>> read_config(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{PTQ_ERR_IO, "cannot open config: " + path};
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::string body = line.substr(first);
    size_t sep = body.find('=');
    if (sep == std::string::npos) sep = body.find_first_of(" \t");
    if (sep == std::string::npos)
      throw CliError{PTQ_ERR_FORMAT, "config line needs key and value: " + line};
    std::string key = body.substr(0, sep);
    std::string value = body.substr(sep + 1);
    const auto ks = key.find_last_not_of(" \t");
    key = key.substr(0, ks + 1);
    const auto vs = value.find_first_not_of(" \t");
    if (vs == std::string::npos)
      throw CliError{PTQ_ERR_FORMAT, "config line needs a value: " + line};
    value = value.substr(vs);
    pairs.emplace_back(key, value);
  }
  return pairs;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"ptq: post-training quantization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "Flat key-value config file; flags win over config values");

  // fixtures ---------------------------------------------------------------
  auto* fixtures = app.add_subcommand(
      "fixtures", "Generate the toy residual model, dataset, and golden pair");
  struct {
    uint64_t seed = 0;
    std::string input = "3x32x32";
    std::string widths = "8,16";
    int classes = 10;
    int dataset_size = 1000;
    bool heavy_tailed = false;
    std::string out;
  } fx;
  fixtures->add_option("--seed", fx.seed, "Generator seed");
  fixtures->add_option("--input", fx.input, "Input size CxHxW");
  fixtures->add_option("--widths", fx.widths,
                       "Channel width per residual block, comma separated");
  fixtures->add_option("--classes", fx.classes, "Class count");
  fixtures->add_option("--dataset-size", fx.dataset_size, "Sample count");
  fixtures->add_flag("--heavy-tailed", fx.heavy_tailed,
                     "Add 1% x10 outliers to the weights");
  fixtures->add_option("--out", fx.out, "Output directory")->required();

  // calibrate ---------------------------------------------------------------
  auto* calibrate = app.add_subcommand(
      "calibrate", "Collect activation statistics and write a profile");
  struct {
    std::string model, dataset, out;
    int64_t samples = 1000;
    uint64_t seed = 0;
    double percentile_k = 99.99;
  } cb;
  calibrate->add_option("--model", cb.model, "Float model manifest")->required();
  calibrate->add_option("--dataset", cb.dataset, "Calibration dataset")
      ->required();
  calibrate->add_option("--calib-samples", cb.samples,
                        "Calibration sample count");
  calibrate->add_option("--seed", cb.seed, "Sampling seed");
  calibrate->add_option("--percentile-k", cb.percentile_k, "AbsP percentile")
      ->check(CLI::Range(0.0, 100.0));
  calibrate->add_option("--out", cb.out, "Profile output path")->required();

  // quantize ----------------------------------------------------------------
  auto* quantize = app.add_subcommand(
      "quantize", "Produce a fake-quantized model from a profile");
  struct {
    std::string model, profile, out;
    PlanFlags plan;
  } qz;
  quantize->add_option("--model", qz.model, "Float model manifest")->required();
  quantize->add_option("--profile", qz.profile, "Calibration profile")
      ->required();
  qz.plan.attach(quantize);
  quantize->add_option("--out", qz.out, "Quantized model manifest path")
      ->required();

  // eval --------------------------------------------------------------------
  auto* eval = app.add_subcommand(
      "eval", "Evaluate a model; with --profile, quantize in memory first");
  struct {
    std::string model, dataset, profile, energy, out;
    PlanFlags plan;
  } ev;
  eval->add_option("--model", ev.model, "Model manifest")->required();
  eval->add_option("--dataset", ev.dataset, "Labeled dataset")->required();
  eval->add_option("--profile", ev.profile,
                   "Calibration profile (enables the plan flags)");
  eval->add_option("--energy-model", ev.energy, "Energy model file");
  ev.plan.attach(eval);
  eval->add_option("--out", ev.out, "Record JSON output path");

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand(
      "sweep", "Run the full quantization-options grid");
  struct {
    std::string model, dataset, profile, energy, out, grid = "full";
    int jobs = 1;
    int64_t samples = 1000;
    uint64_t seed = 0;
    double percentile_k = 99.99;
  } sw;
  sweep->add_option("--model", sw.model, "Float model manifest")->required();
  sweep->add_option("--dataset", sw.dataset, "Labeled dataset")->required();
  sweep->add_option("--profile", sw.profile,
                    "Calibration profile (calibrates in memory when absent)");
  sweep->add_option("--grid", sw.grid, "Grid: full (400 rows) | eq68 (48 rows)")
      ->check(CLI::IsMember({"full", "eq68"}));
  sweep->add_option("--energy-model", sw.energy, "Energy model file");
  sweep->add_option("--jobs", sw.jobs, "Worker threads")->check(CLI::Range(1, 256));
  sweep->add_option("--calib-samples", sw.samples,
                    "Calibration sample count when calibrating in memory");
  sweep->add_option("--seed", sw.seed, "Calibration seed");
  sweep->add_option("--percentile-k", sw.percentile_k, "AbsP percentile")
      ->check(CLI::Range(0.0, 100.0));
  sweep->add_option("--out", sw.out, "Output directory")->required();

  // report ------------------------------------------------------------------
  auto* report = app.add_subcommand(
      "report", "Pareto fronts and acc_diff histograms from a sweep");
  struct {
    std::string sweep_csv, out;
  } rp;
  report->add_option("--sweep", rp.sweep_csv, "sweep.csv path")->required();
  report->add_option("--out", rp.out, "Output directory")->required();

  // Flags win over config: config-derived flags are injected right after the
  // subcommand token, and every option takes its last occurrence.
  for (CLI::App* sub : {fixtures, calibrate, quantize, eval, sweep, report})
    for (CLI::Option* opt : sub->get_options())
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // Pre-scan for --config so its values can be injected before parsing.
    std::string cfg;
    for (size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0)
        cfg = args[i].substr(9);
    }
    if (!cfg.empty() && !args.empty()) {
      CLI::App* sub = app.get_subcommand_no_throw(args[0]);
      if (sub != nullptr) {
        std::vector<std::string> injected;
        for (const auto& [key, value] : read_config(cfg)) {
          CLI::Option* opt = sub->get_option_no_throw("--" + key);
          if (opt == nullptr) continue; // other subcommands' keys
          if (opt->get_expected_min() == 0) {
            if (value == "1" || value == "true") injected.push_back("--" + key);
          } else {
            injected.push_back("--" + key);
            injected.push_back(value);
          }
        }
        args.insert(args.begin() + 1, injected.begin(), injected.end());
      }
    }

    std::vector<const char*> cargs;
    cargs.push_back("ptq");
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(int(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const CliError& e) {
    report_error(e);
    return int(e.status);
  }

  try {
    if (*fixtures) {
      const auto chw = parse_int_list(fx.input, 'x');
      if (chw.size() != 3)
        throw CliError{PTQ_ERR_INVALID_ARGUMENT, "--input must be CxHxW"};
      const auto widths = parse_int_list(fx.widths, ',');
      ptq_fixture_spec spec{};
      spec.seed = fx.seed;
      spec.input_c = chw[0];
      spec.input_h = chw[1];
      spec.input_w = chw[2];
      spec.widths = widths.data();
      spec.num_blocks = int(widths.size());
      spec.classes = fx.classes;
      spec.dataset_size = fx.dataset_size;
      spec.heavy_tailed = fx.heavy_tailed ? 1 : 0;
      check(ptq_fixture_generate(&spec, fx.out.c_str()));
      std::printf("fixture written to %s\n", fx.out.c_str());
    } else if (*calibrate) {
      auto model = load_model(cb.model);
      auto dataset = load_dataset(cb.dataset, false);
      ptq_profile* profile = nullptr;
      check(ptq_calibrate(model.get(), dataset.get(), cb.samples, cb.seed,
                          cb.percentile_k, &profile));
      ProfilePtr holder(profile, &ptq_profile_free);
      check(ptq_profile_save(profile, cb.out.c_str()));
      std::printf("profile written to %s\n", cb.out.c_str());
    } else if (*quantize) {
      auto model = load_model(qz.model);
      auto profile = load_profile(qz.profile);
      const ptq_plan plan = qz.plan.plan();
      ptq_model* out = nullptr;
      check(ptq_quantize(model.get(), profile.get(), &plan, &out));
      ModelPtr holder(out, &ptq_model_free);
      check(ptq_model_save(out, qz.out.c_str()));
      std::printf("quantized model written to %s\n", qz.out.c_str());
    } else if (*eval) {
      auto model = load_model(ev.model);
      auto dataset = load_dataset(ev.dataset, true);
      auto energy = load_energy(ev.energy);
      ptq_eval_summary summary{};
      const char* out_json = ev.out.empty() ? nullptr : ev.out.c_str();
      if (!ev.profile.empty()) {
        auto profile = load_profile(ev.profile);
        const ptq_plan plan = ev.plan.plan();
        check(ptq_evaluate_plan(model.get(), dataset.get(), profile.get(),
                                &plan, energy.get(), out_json, &summary));
      } else {
        check(ptq_evaluate(model.get(), dataset.get(), energy.get(), out_json,
                           &summary));
      }
      print_summary(summary);
      if (out_json) std::printf("record written to %s\n", out_json);
    } else if (*sweep) {
      auto model = load_model(sw.model);
      auto dataset = load_dataset(sw.dataset, true);
      auto energy = load_energy(sw.energy);
      ProfilePtr profile(nullptr, &ptq_profile_free);
      if (!sw.profile.empty()) {
        profile = load_profile(sw.profile);
      } else {
        ptq_profile* p = nullptr;
        check(ptq_calibrate(model.get(), dataset.get(), sw.samples, sw.seed,
                            sw.percentile_k, &p));
        profile = ProfilePtr(p, &ptq_profile_free);
      }
      const ptq_sweep_grid grid =
          sw.grid == "full" ? PTQ_SWEEP_FULL : PTQ_SWEEP_EQUAL68;
      check(ptq_sweep(model.get(), dataset.get(), profile.get(), grid,
                      energy.get(), sw.jobs, sw.percentile_k,
                      sw.out.c_str()));
      std::printf("sweep written to %s\n", sw.out.c_str());
    } else if (*report) {
      check(ptq_report(rp.sweep_csv.c_str(), rp.out.c_str()));
      std::printf("report written to %s\n", rp.out.c_str());
    }
  } catch (const CliError& e) {
    report_error(e);
    return int(e.status);
  }
  return 0;
}
