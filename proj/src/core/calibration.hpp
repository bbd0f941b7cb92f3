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
#include <string>
#include <vector>

#include "core/quantize.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace ptq {

struct ScaleMethod {
  enum class Kind { AbsMax, AbsP, LSQ, LSQPlus, BatchQuant };

  Kind kind = Kind::AbsMax;
  double k = 99.99; // AbsP percentile hyperparameter

  bool operator==(const ScaleMethod&) const = default;
};

const char* scale_method_name(ScaleMethod::Kind kind);
ScaleMethod::Kind parse_scale_method(const std::string& name);

constexpr uint64_t kDefaultReservoirCapacity = uint64_t(1) << 20;

// Uniform reservoir (algorithm R) over a value stream; holds every value
// until the capacity is exceeded, so small streams give exact percentiles.
class Reservoir {
public:
  Reservoir() : rng_(0) {}
  Reservoir(uint64_t capacity, uint64_t seed);

  void add(float abs_value);
  uint64_t seen() const { return seen_; }
  const std::vector<float>& values() const { return values_; }
  double percentile(double k) const;

  // Approximate union, deterministic for a given merge order.
  void merge_from(const Reservoir& other);

private:
  uint64_t capacity_ = 0;
  uint64_t seen_ = 0;
  std::vector<float> values_;
  Rng rng_;
};

struct RunningGroup {
  int64_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double abs_max = 0.0;
  double sum = 0.0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;

  void update(double v);
  void merge(const RunningGroup& o);
  double mean() const { return sum / double(count); }
  double abs_mean() const { return sum_abs / double(count); }
  double stddev() const; // population
};

// Streaming statistics for one site or tensor. Aggregates per declared
// group, plus per-channel min/max (layout channel axis) so BatchQuant can be
// computed even when the declared grouping is whole-tensor.
class CalibrationStats {
public:
  CalibrationStats() = default;
  CalibrationStats(AxisGroup group, uint64_t seed,
                   uint64_t reservoir_capacity = kDefaultReservoirCapacity);

  void update(const Tensor& t);
  void merge_from(const CalibrationStats& other);

  const AxisGroup& group() const { return group_; }
  bool empty() const { return groups_.empty() || groups_[0].count == 0; }
  int64_t group_count() const;
  const std::vector<RunningGroup>& groups() const { return groups_; }
  const std::vector<Reservoir>& reservoirs() const { return reservoirs_; }
  const std::vector<RunningGroup>& channel_groups() const {
    return channel_groups_;
  }

private:
  AxisGroup group_ = AxisGroup::whole();
  uint64_t seed_ = 0;
  uint64_t reservoir_capacity_ = kDefaultReservoirCapacity;
  std::vector<RunningGroup> groups_;
  std::vector<Reservoir> reservoirs_;
  std::vector<RunningGroup> channel_groups_; // empty when no channel axis
  std::optional<int> channel_axis_;
};

// Scale formulas on plain aggregates. All throw on degenerate inputs so a
// zero or negative scale can never escape.
namespace scalefn {
double absmax(double abs_max, const IntRange& r);
double absp(double percentile_value, const IntRange& r);
double lsq(double abs_mean, const IntRange& r);
double lsq_plus(double mean, double stddev, int64_t count, const IntRange& r);
double batchquant(const std::vector<std::pair<double, double>>& channel_minmax,
                  const IntRange& r);
} // namespace scalefn

std::vector<double> scale_absmax(const CalibrationStats& st, const IntRange& r);
std::vector<double> scale_absp(const CalibrationStats& st, double k,
                               const IntRange& r);
std::vector<double> scale_lsq(const CalibrationStats& st, const IntRange& r);
std::vector<double> scale_lsq_plus(const CalibrationStats& st,
                                   const IntRange& r);
double scale_batchquant(const CalibrationStats& st, const IntRange& r);

// Full recipe from streamed stats. Method/target compatibility is enforced:
// LSQ+ requires a signed (weight) range, BatchQuant an unsigned (activation)
// range, and BatchQuant always yields a single per-tensor scale.
QuantParams compute_quant_params(const ScaleMethod& method, const AxisGroup& g,
                                 const CalibrationStats& st, int bits,
                                 bool is_signed);

// Weight path: statistics come straight from the tensor, reservoir sized to
// hold every element so percentiles are exact.
QuantParams compute_weight_quant_params(const Tensor& w,
                                        const ScaleMethod& method,
                                        const AxisGroup& g, int bits);

// ---------------------------------------------------------------------------
// Calibration profile: audit + reuse artifact mapping site id -> stats and
// scales. Scales and stats serialize as hex floats, so round-trips are
// lossless.

struct SiteProfile {
  std::string id;
  std::string tag; // "act" or "res"
  RunningGroup whole;
  std::vector<std::pair<double, double>> channel_minmax;
  std::map<double, double> percentiles; // k -> per_k(|x|)

  static SiteProfile from_stats(const std::string& id, const std::string& tag,
                                const CalibrationStats& st,
                                const std::vector<double>& percentile_ks);
  // Whole-tensor activation scale for the given method.
  double scale_for(const ScaleMethod& method, const IntRange& r) const;
};

struct CalibrationProfile {
  uint64_t seed = 0;
  int64_t samples = 0;
  uint64_t reservoir_capacity = kDefaultReservoirCapacity;
  std::vector<SiteProfile> sites; // graph topological order

  const SiteProfile* find(const std::string& id) const;
  void save(const std::string& path) const;
  static CalibrationProfile load(const std::string& path);
};

} // namespace ptq
