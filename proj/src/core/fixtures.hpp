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

#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/model_io.hpp"

namespace ptq {

// Deterministic toy residual CNN + synthetic labeled dataset, small enough
// that full quantization sweeps run at desk scale. Labels are the float
// model's own argmax, so float top-1 is 1.0 by construction and quantized
// top-1 measures pure quantization damage.
struct FixtureSpec {
  uint64_t seed = 0;
  int in_c = 3, in_h = 32, in_w = 32;
  std::vector<int> widths = {8, 16}; // one residual block per entry
  int classes = 10;
  int dataset_size = 1000;
  bool heavy_tailed = false; // adds 1% x10 weight outliers

  void validate() const;
};

ModelGraph gen_toy_model(const FixtureSpec& spec);

Dataset gen_dataset(const FixtureSpec& spec, const ModelGraph& float_model);

struct GoldenPair {
  Tensor input;  // (1, C, H, W)
  Tensor logits; // (1, classes)
};

GoldenPair gen_golden(const FixtureSpec& spec, const ModelGraph& float_model);

// Emits model.ptqm/.ptqt, dataset.ptqt (+ .labels) and golden.ptqt into
// out_dir. Same spec always produces byte-identical files.
void write_fixture_files(const FixtureSpec& spec, const std::string& out_dir);

} // namespace ptq
