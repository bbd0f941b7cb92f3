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
#include <vector>

#include "core/tensor.hpp"

namespace ptq {

// Symmetric uniform quantization: the represented value set is
// { k * s : int_min <= k <= int_max }. Signed ranges serve weights,
// unsigned ranges serve post-ReLU activations.
struct IntRange {
  int bits = 8;
  bool is_signed = true;
  int32_t int_min = -128;
  int32_t int_max = 127;
};

IntRange make_int_range(int bits, bool is_signed);

struct QuantParams {
  IntRange range;
  AxisGroup group;
  std::vector<double> scales; // one per group, all > 0 and finite

  void validate_for(const Tensor& t) const;
};

// clamp(x/s, int_min, int_max), then round to nearest with ties to even.
int32_t quantize_value(double x, double scale, const IntRange& r);

double dequantize_value(int64_t q, double scale);

// Per-element quantize-dequantize with per-group scale selection. Output
// shape and layout equal the input.
Tensor fake_quantize_tensor(const Tensor& t, const QuantParams& p);

// Counts elements whose rounded unclamped quotient falls outside the integer
// range (used to assert that AbsMax never clamps its own calibration data).
int64_t count_clamp_events(const Tensor& t, const QuantParams& p);

// (1/N) sum (fp_i - q_i)^2
double quant_mse(const Tensor& fp, const Tensor& q);

} // namespace ptq
