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

// Independent reference implementations used only by tests. Kept separate
// from the library so oracle checks never share code with the paths they
// verify.

#pragma once

#include <cstdint>
#include <vector>

#include "core/quantize.hpp"
#include "core/tensor.hpp"

namespace ptq::oracle {

// Nearest grid point of { k*s : int_min <= k <= int_max } by exhaustive
// search; equidistant neighbors resolve to the even k.
int32_t nearest_grid_point(double x, double s, const IntRange& r);

// Plain sextuple-loop convolution with explicit zero padding and an
// (ic, ky, kx) inner accumulation order; bias added last.
Tensor conv2d_naive(const Tensor& input, const Tensor& weight,
                    const Tensor* bias, int stride, int pad);

// Same loops with a MAC counter instead of arithmetic.
uint64_t conv2d_mac_count(int64_t in_c, int64_t in_h, int64_t in_w,
                          int64_t out_c, int64_t kh, int64_t kw, int stride,
                          int pad);

// O(n^2) domination filter, indices sorted by (cost, accuracy desc, index).
std::vector<size_t> pareto_brute_force(const std::vector<double>& cost,
                                       const std::vector<double>& accuracy);

} // namespace ptq::oracle
