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
#include <string>

#include "core/calibration.hpp"
#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace ptq {

enum class ExecMode { Float, FakeQuant, Calibrate };

// Per-site streaming statistics gathered during Calibrate forwards.
struct CalibContext {
  uint64_t seed = 0;
  uint64_t reservoir_capacity = kDefaultReservoirCapacity;
  std::map<std::string, CalibrationStats> stats; // keyed by Quant-node id
};

// Per-site accumulated squared error between the tensor entering a Quant
// node and its fake-quantized output.
struct SiteMse {
  double sum_sq = 0.0;
  int64_t count = 0;

  double mse() const { return count == 0 ? 0.0 : sum_sq / double(count); }
};
using SiteMseMap = std::map<std::string, SiteMse>;

// Runs the graph on one NCHW batch and returns logits (N, classes).
// Float ignores Quant nodes, FakeQuant applies them (and requires both the
// node scales and the weights to be resolved), Calibrate is Float plus
// statistics capture at every Quant site.
Tensor forward(const ModelGraph& g, const Tensor& input, ExecMode mode,
               CalibContext* calib = nullptr, SiteMseMap* mse = nullptr);

// Convenience: splits (N,C,H,W) images into batches and stacks the logits.
Tensor forward_all(const ModelGraph& g, const Tensor& images, ExecMode mode,
                   SiteMseMap* mse = nullptr, int64_t batch_size = 64);

// Rows of `images` selected by index, in order.
Tensor gather_samples(const Tensor& images,
                      const std::vector<int64_t>& indices);

// Deterministic sample of `sample_size` inputs without replacement, then a
// Calibrate forward over them. Returns stats per Quant-node site.
std::map<std::string, CalibrationStats> run_calibration(
    const ModelGraph& g, const Tensor& images, int64_t sample_size,
    uint64_t seed, uint64_t reservoir_capacity = kDefaultReservoirCapacity);

} // namespace ptq
