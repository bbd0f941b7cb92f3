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

#include "core/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ptq {

const char* scale_method_name(ScaleMethod::Kind kind) {
  switch (kind) {
    case ScaleMethod::Kind::AbsMax: return "absmax";
    case ScaleMethod::Kind::AbsP: return "absp";
    case ScaleMethod::Kind::LSQ: return "lsq";
    case ScaleMethod::Kind::LSQPlus: return "lsqplus";
    case ScaleMethod::Kind::BatchQuant: return "batchquant";
  }
  return "?";
}

ScaleMethod::Kind parse_scale_method(const std::string& name) {
  if (name == "absmax") return ScaleMethod::Kind::AbsMax;
  if (name == "absp") return ScaleMethod::Kind::AbsP;
  if (name == "lsq") return ScaleMethod::Kind::LSQ;
  if (name == "lsqplus" || name == "lsq+") return ScaleMethod::Kind::LSQPlus;
  if (name == "batchquant") return ScaleMethod::Kind::BatchQuant;
  fail(ErrorCode::InvalidArgument, "unknown scale method: " + name);
}

// --------------------------------------------------------------------------
// Reservoir

Reservoir::Reservoir(uint64_t capacity, uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity == 0)
    fail(ErrorCode::InvalidArgument, "reservoir capacity must be positive");
}

void Reservoir::add(float abs_value) {
  seen_++;
  if (uint64_t(values_.size()) < capacity_) {
    values_.push_back(abs_value);
    return;
  }
  const uint64_t j = rng_.below(seen_);
  if (j < capacity_) values_[size_t(j)] = abs_value;
}

double Reservoir::percentile(double k) const {
  if (values_.empty()) fail(ErrorCode::Degenerate, "no calibration data");
  if (!(k >= 0.0 && k <= 100.0))
    fail(ErrorCode::InvalidArgument, "percentile k must be in [0, 100]");
  std::vector<float> copy = values_;
  return interpolated_abs_percentile(copy, k);
}

void Reservoir::merge_from(const Reservoir& other) {
  if (other.seen_ == 0) return;
  if (seen_ == 0) {
    *this = other;
    return;
  }
  if (uint64_t(values_.size() + other.values_.size()) <= capacity_) {
    values_.insert(values_.end(), other.values_.begin(), other.values_.end());
    seen_ += other.seen_;
    return;
  }
  // Weighted draw without replacement from both pools; each kept value
  // stands for seen/size stream elements.
  std::vector<float> a = values_;
  std::vector<float> b = other.values_;
  double wa = double(seen_), wb = double(other.seen_);
  const double wa_step = wa / double(a.size());
  const double wb_step = wb / double(b.size());
  std::vector<float> merged;
  merged.reserve(size_t(capacity_));
  while (merged.size() < capacity_ && (!a.empty() || !b.empty())) {
    const bool from_a =
        b.empty() || (!a.empty() && rng_.uniform() * (wa + wb) < wa);
    auto& pool = from_a ? a : b;
    const size_t i = size_t(rng_.below(pool.size()));
    merged.push_back(pool[i]);
    pool[i] = pool.back();
    pool.pop_back();
    if (from_a) wa = std::max(0.0, wa - wa_step);
    else wb = std::max(0.0, wb - wb_step);
  }
  values_ = std::move(merged);
  seen_ += other.seen_;
}

// --------------------------------------------------------------------------
// RunningGroup

void RunningGroup::update(double v) {
  if (count == 0) {
    min = v;
    max = v;
  } else {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  abs_max = std::max(abs_max, std::fabs(v));
  sum += v;
  sum_abs += std::fabs(v);
  sum_sq += v * v;
  count++;
}

void RunningGroup::merge(const RunningGroup& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  min = std::min(min, o.min);
  max = std::max(max, o.max);
  abs_max = std::max(abs_max, o.abs_max);
  sum += o.sum;
  sum_abs += o.sum_abs;
  sum_sq += o.sum_sq;
  count += o.count;
}

double RunningGroup::stddev() const {
  const double m = mean();
  return std::sqrt(std::max(0.0, sum_sq / double(count) - m * m));
}

// --------------------------------------------------------------------------
// CalibrationStats

CalibrationStats::CalibrationStats(AxisGroup group, uint64_t seed,
                                   uint64_t reservoir_capacity)
    : group_(group), seed_(seed), reservoir_capacity_(reservoir_capacity) {}

static std::optional<int> layout_channel_axis(const Tensor& t) {
  if (t.layout() == Layout::ActNCHW && t.rank() >= 2) return 1;
  if (t.layout() == Layout::Matrix && t.rank() == 2) return 1; // (N, units)
  return std::nullopt;
}

void CalibrationStats::update(const Tensor& t) {
  group_.validate(t);
  const int64_t ngroups = group_.group_count(t);

  if (groups_.empty()) {
    groups_.resize(size_t(ngroups));
    reservoirs_.reserve(size_t(ngroups));
    for (int64_t g = 0; g < ngroups; ++g)
      reservoirs_.emplace_back(reservoir_capacity_,
                               mix_seed(seed_, "g" + std::to_string(g)));
    channel_axis_ = group_.mode == AxisGroup::Mode::WholeTensor
                        ? layout_channel_axis(t)
                        : std::nullopt;
    if (channel_axis_) channel_groups_.resize(size_t(t.dim(*channel_axis_)));
  } else if (int64_t(groups_.size()) != ngroups) {
    fail(ErrorCode::InvalidArgument,
         "tensor group layout changed between calibration updates");
  }

  int64_t inner = 1, dim = 1;
  if (group_.mode == AxisGroup::Mode::PerOutputChannel) {
    dim = t.dim(group_.axis);
    for (int64_t a = group_.axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
  }

  auto data = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    const int64_t g = dim == 1 ? 0 : (i / inner) % dim;
    const double v = data[size_t(i)];
    groups_[size_t(g)].update(v);
    reservoirs_[size_t(g)].add(float(std::fabs(data[size_t(i)])));
  }

  if (channel_axis_) {
    if (t.rank() <= *channel_axis_ ||
        int64_t(channel_groups_.size()) != t.dim(*channel_axis_))
      fail(ErrorCode::InvalidArgument,
           "tensor channel layout changed between calibration updates");
    int64_t cinner = 1;
    const int64_t cdim = t.dim(*channel_axis_);
    for (int64_t a = *channel_axis_ + 1; a < t.rank(); ++a) cinner *= t.dim(a);
    for (int64_t i = 0; i < t.numel(); ++i) {
      const int64_t c = (i / cinner) % cdim;
      channel_groups_[size_t(c)].update(double(data[size_t(i)]));
    }
  }
}

void CalibrationStats::merge_from(const CalibrationStats& other) {
  if (other.groups_.empty()) return;
  if (groups_.empty()) {
    *this = other;
    return;
  }
  if (!(group_ == other.group_) || groups_.size() != other.groups_.size() ||
      channel_groups_.size() != other.channel_groups_.size())
    fail(ErrorCode::InvalidArgument, "cannot merge incompatible stats");
  for (size_t g = 0; g < groups_.size(); ++g) {
    groups_[g].merge(other.groups_[g]);
    reservoirs_[g].merge_from(other.reservoirs_[g]);
  }
  for (size_t c = 0; c < channel_groups_.size(); ++c)
    channel_groups_[c].merge(other.channel_groups_[c]);
}

int64_t CalibrationStats::group_count() const {
  if (empty()) fail(ErrorCode::Degenerate, "no calibration data");
  return int64_t(groups_.size());
}

// --------------------------------------------------------------------------
// Scale formulas

namespace scalefn {

double absmax(double abs_max, const IntRange& r) {
  if (!(abs_max > 0.0))
    fail(ErrorCode::Degenerate, "degenerate all-zero group");
  return abs_max / double(r.int_max);
}

double absp(double percentile_value, const IntRange& r) {
  if (!(percentile_value > 0.0))
    fail(ErrorCode::Degenerate, "degenerate percentile value");
  return percentile_value / double(r.int_max);
}

double lsq(double abs_mean, const IntRange& r) {
  const double s = 2.0 * abs_mean / std::sqrt(double(r.int_max));
  if (!(s > 0.0)) fail(ErrorCode::Degenerate, "degenerate all-zero group");
  return s;
}

double lsq_plus(double mean, double stddev, int64_t count, const IntRange& r) {
  if (!r.is_signed)
    fail(ErrorCode::Incompatible, "LSQ+ is weight-only (signed ranges)");
  if (count < 2)
    fail(ErrorCode::Degenerate, "LSQ+ needs at least two samples");
  const double hi =
      std::max(std::fabs(mean - 3.0 * stddev), std::fabs(mean + 3.0 * stddev));
  if (!(hi > 0.0)) fail(ErrorCode::Degenerate, "degenerate all-zero group");
  return hi / std::fabs(double(r.int_min));
}

double batchquant(const std::vector<std::pair<double, double>>& channel_minmax,
                  const IntRange& r) {
  if (r.is_signed)
    fail(ErrorCode::Incompatible,
         "BatchQuant is activation-only (unsigned ranges)");
  if (channel_minmax.empty())
    fail(ErrorCode::Degenerate, "no per-channel statistics for BatchQuant");
  double sum = 0.0;
  for (const auto& [mn, mx] : channel_minmax) sum += mx - mn;
  const double mean_range = sum / double(channel_minmax.size());
  if (!(mean_range > 0.0))
    fail(ErrorCode::Degenerate, "all channels constant");
  return mean_range / double(r.int_max - r.int_min);
}

} // namespace scalefn

std::vector<double> scale_absmax(const CalibrationStats& st, const IntRange& r) {
  st.group_count();
  std::vector<double> out;
  for (const auto& g : st.groups()) out.push_back(scalefn::absmax(g.abs_max, r));
  return out;
}

std::vector<double> scale_absp(const CalibrationStats& st, double k,
                               const IntRange& r) {
  st.group_count();
  std::vector<double> out;
  for (const auto& res : st.reservoirs())
    out.push_back(scalefn::absp(res.percentile(k), r));
  return out;
}

std::vector<double> scale_lsq(const CalibrationStats& st, const IntRange& r) {
  st.group_count();
  std::vector<double> out;
  for (const auto& g : st.groups()) out.push_back(scalefn::lsq(g.abs_mean(), r));
  return out;
}

std::vector<double> scale_lsq_plus(const CalibrationStats& st,
                                   const IntRange& r) {
  st.group_count();
  std::vector<double> out;
  for (const auto& g : st.groups())
    out.push_back(scalefn::lsq_plus(g.mean(), g.stddev(), g.count, r));
  return out;
}

double scale_batchquant(const CalibrationStats& st, const IntRange& r) {
  st.group_count();
  std::vector<std::pair<double, double>> ranges;
  for (const auto& c : st.channel_groups())
    if (c.count > 0) ranges.emplace_back(c.min, c.max);
  return scalefn::batchquant(ranges, r);
}

QuantParams compute_quant_params(const ScaleMethod& method, const AxisGroup& g,
                                 const CalibrationStats& st, int bits,
                                 bool is_signed) {
  const IntRange r = make_int_range(bits, is_signed);
  QuantParams p;
  p.range = r;
  p.group = g;

  if (method.kind == ScaleMethod::Kind::BatchQuant) {
    if (g.mode != AxisGroup::Mode::WholeTensor)
      fail(ErrorCode::Incompatible,
           "BatchQuant yields a single per-tensor scale");
    p.scales = {scale_batchquant(st, r)};
    return p;
  }

  if (!(st.group() == g))
    fail(ErrorCode::InvalidArgument, "stats grouping does not match request");

  switch (method.kind) {
    case ScaleMethod::Kind::AbsMax: p.scales = scale_absmax(st, r); break;
    case ScaleMethod::Kind::AbsP: p.scales = scale_absp(st, method.k, r); break;
    case ScaleMethod::Kind::LSQ: p.scales = scale_lsq(st, r); break;
    case ScaleMethod::Kind::LSQPlus: p.scales = scale_lsq_plus(st, r); break;
    case ScaleMethod::Kind::BatchQuant: break; // handled above
  }
  return p;
}

QuantParams compute_weight_quant_params(const Tensor& w,
                                        const ScaleMethod& method,
                                        const AxisGroup& g, int bits) {
  if (method.kind == ScaleMethod::Kind::BatchQuant)
    fail(ErrorCode::Incompatible, "BatchQuant is activation-only");
  const uint64_t capacity =
      std::max<uint64_t>(kDefaultReservoirCapacity, uint64_t(w.numel()));
  CalibrationStats st(g, /*seed=*/0, capacity);
  st.update(w);
  return compute_quant_params(method, g, st, bits, /*is_signed=*/true);
}

// --------------------------------------------------------------------------
// Profile serialization

SiteProfile SiteProfile::from_stats(const std::string& id,
                                    const std::string& tag,
                                    const CalibrationStats& st,
                                    const std::vector<double>& percentile_ks) {
  if (st.empty()) fail(ErrorCode::Degenerate, "no calibration data");
  if (st.group().mode != AxisGroup::Mode::WholeTensor)
    fail(ErrorCode::InvalidArgument, "site profiles are whole-tensor");
  SiteProfile s;
  s.id = id;
  s.tag = tag;
  s.whole = st.groups()[0];
  for (const auto& c : st.channel_groups())
    if (c.count > 0) s.channel_minmax.emplace_back(c.min, c.max);
  for (double k : percentile_ks)
    s.percentiles[k] = st.reservoirs()[0].percentile(k);
  return s;
}

double SiteProfile::scale_for(const ScaleMethod& method,
                              const IntRange& r) const {
  switch (method.kind) {
    case ScaleMethod::Kind::AbsMax: return scalefn::absmax(whole.abs_max, r);
    case ScaleMethod::Kind::AbsP: {
      auto it = percentiles.find(method.k);
      if (it == percentiles.end())
        fail(ErrorCode::Incompatible,
             "profile holds no percentile for the requested k; recalibrate");
      return scalefn::absp(it->second, r);
    }
    case ScaleMethod::Kind::LSQ: return scalefn::lsq(whole.abs_mean(), r);
    case ScaleMethod::Kind::BatchQuant:
      return scalefn::batchquant(channel_minmax, r);
    case ScaleMethod::Kind::LSQPlus:
      fail(ErrorCode::Incompatible, "LSQ+ is weight-only");
  }
  fail(ErrorCode::Internal, "unreachable");
}

const SiteProfile* CalibrationProfile::find(const std::string& id) const {
  for (const auto& s : sites)
    if (s.id == id) return &s;
  return nullptr;
}

namespace {

std::string hexf(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hexf(const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Format, "bad numeric field: " + s);
  }
}

} // namespace

void CalibrationProfile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open for writing: " + path);
  out << "ptqprofile v1\n";
  out << "seed " << seed << "\n";
  out << "samples " << samples << "\n";
  out << "reservoir_capacity " << reservoir_capacity << "\n";
  for (const auto& s : sites) {
    out << "site " << s.id << " tag=" << s.tag << " count=" << s.whole.count
        << " min=" << hexf(s.whole.min) << " max=" << hexf(s.whole.max)
        << " absmax=" << hexf(s.whole.abs_max) << " sum=" << hexf(s.whole.sum)
        << " sumabs=" << hexf(s.whole.sum_abs)
        << " sumsq=" << hexf(s.whole.sum_sq) << "\n";
    for (const auto& [k, v] : s.percentiles)
      out << "perc " << s.id << " k=" << hexf(k) << " v=" << hexf(v) << "\n";
    for (size_t c = 0; c < s.channel_minmax.size(); ++c)
      out << "chan " << s.id << " c=" << c
          << " min=" << hexf(s.channel_minmax[c].first)
          << " max=" << hexf(s.channel_minmax[c].second) << "\n";
  }
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

namespace {

std::map<std::string, std::string> parse_kv(std::istringstream& in,
                                            const std::string& line) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Format, "expected key=value, got '" + tok +
                                  "' in line: " + line);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv,
                        const std::string& key, const std::string& line) {
  auto it = kv.find(key);
  if (it == kv.end())
    fail(ErrorCode::Format, "missing field '" + key + "' in line: " + line);
  return it->second;
}

} // namespace

CalibrationProfile CalibrationProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ptqprofile v1")
    fail(ErrorCode::Format, "unsupported profile header in " + path);

  CalibrationProfile p;
  SiteProfile* cur = nullptr;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "seed") {
      ls >> p.seed;
    } else if (kind == "samples") {
      ls >> p.samples;
    } else if (kind == "reservoir_capacity") {
      ls >> p.reservoir_capacity;
    } else if (kind == "site") {
      std::string id;
      ls >> id;
      auto kv = parse_kv(ls, line);
      SiteProfile s;
      s.id = id;
      s.tag = need(kv, "tag", line);
      s.whole.count = int64_t(parse_hexf(need(kv, "count", line)));
      s.whole.min = parse_hexf(need(kv, "min", line));
      s.whole.max = parse_hexf(need(kv, "max", line));
      s.whole.abs_max = parse_hexf(need(kv, "absmax", line));
      s.whole.sum = parse_hexf(need(kv, "sum", line));
      s.whole.sum_abs = parse_hexf(need(kv, "sumabs", line));
      s.whole.sum_sq = parse_hexf(need(kv, "sumsq", line));
      p.sites.push_back(std::move(s));
      cur = &p.sites.back();
    } else if (kind == "perc") {
      std::string id;
      ls >> id;
      if (!cur || cur->id != id)
        fail(ErrorCode::Format, "perc line out of order: " + line);
      auto kv = parse_kv(ls, line);
      cur->percentiles[parse_hexf(need(kv, "k", line))] =
          parse_hexf(need(kv, "v", line));
    } else if (kind == "chan") {
      std::string id;
      ls >> id;
      if (!cur || cur->id != id)
        fail(ErrorCode::Format, "chan line out of order: " + line);
      auto kv = parse_kv(ls, line);
      cur->channel_minmax.emplace_back(parse_hexf(need(kv, "min", line)),
                                       parse_hexf(need(kv, "max", line)));
    } else {
      fail(ErrorCode::Format, "unknown profile record: " + line);
    }
  }
  return p;
}

} // namespace ptq
