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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace ptq {

// Fraction of rows whose argmax equals the label; argmax ties break to the
// lowest class index.
double top1_accuracy(const Tensor& logits, std::span<const uint32_t> labels);

int64_t argmax_row(const Tensor& logits, int64_t row);

struct ExperimentRecord {
  QuantPlan plan;
  bool is_float = false;
  double top1 = 0.0;
  double agreement_with_float = 0.0;
  std::map<std::string, double> weight_mse;
  double weight_mse_mean = 0.0;
  std::map<std::string, double> act_mse;
  double act_mse_mean = 0.0;
  double footprint_bytes = 0.0;
  double energy_joules = 0.0;
  uint64_t macs = 0;
  double acc_diff = 0.0;
  std::string status = "ok";
  std::string error;
};

// acc_diff = record top1 minus the mean top1 of its (wl_w, wl_a) group.
// Error rows are skipped. Sums to zero within every group by construction.
void compute_acc_diff(std::vector<ExperimentRecord>& records);

// (sum weight elements * wl_w + sum activation elements * wl_a) / 8.
// Weight elements cover conv/FC weight tensors (biases stay float and are
// not counted); activation elements count every producing node's output once
// at batch 1, Quant and Output pass-throughs excluded.
double memory_footprint_bytes(const ModelGraph& g, int wl_w, int wl_a);
uint64_t weight_element_count(const ModelGraph& g);
uint64_t activation_element_count(const ModelGraph& g);

// Conv: output elements x kernel volume; FC: in x out.
uint64_t mac_count(const ModelGraph& g);

// Indices of the non-dominated records (cost minimized, accuracy maximized),
// sorted by cost ascending. Duplicate non-dominated points are all kept.
std::vector<size_t> pareto_front_indices(std::span<const double> cost,
                                         std::span<const double> accuracy);

// nullopt when either side has zero variance (undefined, not NaN).
std::optional<double> pearson_correlation(std::span<const double> x,
                                          std::span<const double> y);

} // namespace ptq
