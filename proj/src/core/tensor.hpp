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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"

namespace ptq {

// Layout tag makes channel grouping unambiguous: output channel is axis 0
// for OIHW weights and axis 1 for NCHW activations.
enum class Layout : uint16_t {
  ActNCHW = 0,
  WeightOIHW = 1,
  Vector = 2,
  Matrix = 3, // (rows, cols); FC weight is (out, in)
};

const char* layout_name(Layout l);

// Dense row-major float32 tensor. Immutable by convention once built; all
// operations below are pure and return new values.
class Tensor {
public:
  Tensor() = default;
  Tensor(std::vector<int64_t> shape, Layout layout);
  Tensor(std::vector<int64_t> shape, std::vector<float> data, Layout layout);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return int64_t(shape_.size()); }
  int64_t numel() const { return int64_t(data_.size()); }
  int64_t dim(int64_t axis) const { return shape_[size_t(axis)]; }
  Layout layout() const { return layout_; }

  std::span<const float> data() const { return data_; }
  std::span<float> mutable_data() { return data_; }

  // Re-checks the finiteness invariant after in-place edits.
  void check_finite() const;

private:
  std::vector<int64_t> shape_;
  std::vector<float> data_;
  Layout layout_ = Layout::Vector;
};

// Grouping for statistics and scales: one group for the whole tensor, or one
// per output channel along a named axis.
struct AxisGroup {
  enum class Mode { WholeTensor, PerOutputChannel };

  Mode mode = Mode::WholeTensor;
  int axis = 0;

  static AxisGroup whole() { return {Mode::WholeTensor, 0}; }
  static AxisGroup per_channel(int axis) {
    return {Mode::PerOutputChannel, axis};
  }
  // Channel axis implied by the tensor layout.
  static AxisGroup per_channel_of(const Tensor& t);

  bool operator==(const AxisGroup&) const = default;

  int64_t group_count(const Tensor& t) const;
  void validate(const Tensor& t) const;
};

struct GroupStats {
  double min = 0.0;
  double max = 0.0;
  double abs_max = 0.0;
  double abs_mean = 0.0;
  double mean = 0.0;
  double stddev = 0.0; // population
  int64_t count = 0;
};

struct StatsSummary {
  AxisGroup group;
  std::vector<GroupStats> groups;
};

StatsSummary reduce_stats(const Tensor& t, const AxisGroup& g);

// per_k(|t|) per group: linear interpolation between order statistics of the
// sorted absolute values at fractional rank k/100 * (N-1). k = 100 returns
// max(|t|) exactly.
std::vector<double> percentile_abs(const Tensor& t, double k,
                                   const AxisGroup& g);

// Sorts in place and interpolates. Shared with the calibration reservoir so
// both paths use the identical percentile definition.
double interpolated_abs_percentile(std::vector<float>& abs_values, double k);

} // namespace ptq
