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

#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ptq {

const char* layout_name(Layout l) {
  switch (l) {
    case Layout::ActNCHW: return "nchw";
    case Layout::WeightOIHW: return "oihw";
    case Layout::Vector: return "vector";
    case Layout::Matrix: return "matrix";
  }
  return "?";
}

static int64_t checked_numel(const std::vector<int64_t>& shape) {
  if (shape.empty()) fail(ErrorCode::InvalidArgument, "tensor rank must be >= 1");
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) fail(ErrorCode::InvalidArgument, "tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> shape, Layout layout)
    : shape_(std::move(shape)), layout_(layout) {
  data_.assign(size_t(checked_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> data, Layout layout)
    : shape_(std::move(shape)), data_(std::move(data)), layout_(layout) {
  if (checked_numel(shape_) != int64_t(data_.size()))
    fail(ErrorCode::InvalidArgument, "tensor shape/data size mismatch");
  check_finite();
}

void Tensor::check_finite() const {
  for (float v : data_)
    if (!std::isfinite(v))
      fail(ErrorCode::InvalidArgument, "tensor holds non-finite values");
}

AxisGroup AxisGroup::per_channel_of(const Tensor& t) {
  switch (t.layout()) {
    case Layout::WeightOIHW: return per_channel(0);
    case Layout::ActNCHW: return per_channel(1);
    case Layout::Matrix: return per_channel(0); // FC weight rows = out units
    case Layout::Vector:
      fail(ErrorCode::InvalidArgument, "vector tensors have no channel axis");
  }
  return whole();
}

int64_t AxisGroup::group_count(const Tensor& t) const {
  validate(t);
  return mode == Mode::WholeTensor ? 1 : t.dim(axis);
}

void AxisGroup::validate(const Tensor& t) const {
  if (mode == Mode::PerOutputChannel && (axis < 0 || axis >= t.rank()))
    fail(ErrorCode::InvalidArgument, "channel axis out of range for tensor rank");
}

namespace {

// Row-major group resolution: flat index i belongs to group
// (i / inner_stride) % axis_dim.
struct GroupIndexer {
  int64_t inner = 1;
  int64_t dim = 1;

  GroupIndexer(const Tensor& t, const AxisGroup& g) {
    if (g.mode == AxisGroup::Mode::PerOutputChannel) {
      dim = t.dim(g.axis);
      for (int64_t a = g.axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
    }
  }

  int64_t group_of(int64_t flat) const {
    return dim == 1 ? 0 : (flat / inner) % dim;
  }
};

} // namespace

StatsSummary reduce_stats(const Tensor& t, const AxisGroup& g) {
  if (t.numel() == 0) fail(ErrorCode::InvalidArgument, "empty input");
  g.validate(t);

  const int64_t ngroups = g.group_count(t);
  struct Acc {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    double sum = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    int64_t count = 0;
  };
  std::vector<Acc> acc(size_t(ngroups));

  GroupIndexer idx(t, g);
  auto data = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    const double v = data[size_t(i)];
    Acc& a = acc[size_t(idx.group_of(i))];
    a.min = std::min(a.min, v);
    a.max = std::max(a.max, v);
    a.sum += v;
    a.sum_abs += std::fabs(v);
    a.sum_sq += v * v;
    a.count++;
  }

  StatsSummary out;
  out.group = g;
  out.groups.reserve(size_t(ngroups));
  for (const Acc& a : acc) {
    GroupStats s;
    s.count = a.count;
    s.min = a.min;
    s.max = a.max;
    s.abs_max = std::max(std::fabs(a.min), std::fabs(a.max));
    s.mean = a.sum / double(a.count);
    s.abs_mean = a.sum_abs / double(a.count);
    const double var = std::max(0.0, a.sum_sq / double(a.count) - s.mean * s.mean);
    s.stddev = std::sqrt(var);
    out.groups.push_back(s);
  }
  return out;
}

double interpolated_abs_percentile(std::vector<float>& abs_sorted, double k) {
  std::sort(abs_sorted.begin(), abs_sorted.end());
  const int64_t n = int64_t(abs_sorted.size());
  if (n == 1) return abs_sorted[0];
  const double rank = (k / 100.0) * double(n - 1);
  const int64_t lo = int64_t(rank);
  if (lo >= n - 1) return abs_sorted[size_t(n - 1)];
  const double frac = rank - double(lo);
  const double a = abs_sorted[size_t(lo)];
  const double b = abs_sorted[size_t(lo + 1)];
  return a + frac * (b - a);
}

std::vector<double> percentile_abs(const Tensor& t, double k, const AxisGroup& g) {
  if (t.numel() == 0) fail(ErrorCode::InvalidArgument, "empty input");
  if (!(k >= 0.0 && k <= 100.0))
    fail(ErrorCode::InvalidArgument, "percentile k must be in [0, 100]");
  g.validate(t);

  const int64_t ngroups = g.group_count(t);
  std::vector<std::vector<float>> per_group(size_t(ngroups));
  GroupIndexer idx(t, g);
  auto data = t.data();
  for (int64_t i = 0; i < t.numel(); ++i)
    per_group[size_t(idx.group_of(i))].push_back(std::fabs(data[size_t(i)]));

  std::vector<double> out;
  out.reserve(size_t(ngroups));
  for (auto& vals : per_group)
    out.push_back(interpolated_abs_percentile(vals, k));
  return out;
}

} // namespace ptq
