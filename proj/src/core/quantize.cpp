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

#include "core/quantize.hpp"

#include <algorithm>
#include <cmath>

namespace ptq {

IntRange make_int_range(int bits, bool is_signed) {
  if (bits < 1 || bits > 16)
    fail(ErrorCode::InvalidArgument, "word-length must be in [1, 16]");
  IntRange r;
  r.bits = bits;
  r.is_signed = is_signed;
  if (is_signed) {
    r.int_min = -(int32_t(1) << (bits - 1));
    r.int_max = (int32_t(1) << (bits - 1)) - 1;
  } else {
    r.int_min = 0;
    r.int_max = (int32_t(1) << bits) - 1;
  }
  return r;
}

void QuantParams::validate_for(const Tensor& t) const {
  group.validate(t);
  if (int64_t(scales.size()) != group.group_count(t))
    fail(ErrorCode::InvalidArgument, "scale count does not match group count");
  for (double s : scales)
    if (!(s > 0.0) || !std::isfinite(s))
      fail(ErrorCode::InvalidArgument, "scales must be positive and finite");
}

// std::nearbyint under the default FE_TONEAREST mode rounds ties to even.
int32_t quantize_value(double x, double scale, const IntRange& r) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    fail(ErrorCode::InvalidArgument, "scale must be positive and finite");
  if (!std::isfinite(x))
    fail(ErrorCode::InvalidArgument, "cannot quantize non-finite value");
  const double clamped =
      std::clamp(x / scale, double(r.int_min), double(r.int_max));
  return int32_t(std::nearbyint(clamped));
}

double dequantize_value(int64_t q, double scale) {
  return double(q) * scale;
}

Tensor fake_quantize_tensor(const Tensor& t, const QuantParams& p) {
  p.validate_for(t);

  int64_t inner = 1, dim = 1;
  if (p.group.mode == AxisGroup::Mode::PerOutputChannel) {
    dim = t.dim(p.group.axis);
    for (int64_t a = p.group.axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
  }

  std::vector<float> out(size_t(t.numel()));
  auto data = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    const int64_t g = dim == 1 ? 0 : (i / inner) % dim;
    const double s = p.scales[size_t(g)];
    const int32_t q = quantize_value(data[size_t(i)], s, p.range);
    out[size_t(i)] = float(dequantize_value(q, s));
  }
  return Tensor(t.shape(), std::move(out), t.layout());
}

int64_t count_clamp_events(const Tensor& t, const QuantParams& p) {
  p.validate_for(t);

  int64_t inner = 1, dim = 1;
  if (p.group.mode == AxisGroup::Mode::PerOutputChannel) {
    dim = t.dim(p.group.axis);
    for (int64_t a = p.group.axis + 1; a < t.rank(); ++a) inner *= t.dim(a);
  }

  int64_t events = 0;
  auto data = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    const int64_t g = dim == 1 ? 0 : (i / inner) % dim;
    const double q = std::nearbyint(double(data[size_t(i)]) / p.scales[size_t(g)]);
    if (q < double(p.range.int_min) || q > double(p.range.int_max)) events++;
  }
  return events;
}

double quant_mse(const Tensor& fp, const Tensor& q) {
  if (fp.shape() != q.shape())
    fail(ErrorCode::InvalidArgument, "quant_mse requires identical shapes");
  double sum = 0.0;
  auto a = fp.data();
  auto b = q.data();
  for (int64_t i = 0; i < fp.numel(); ++i) {
    const double d = double(a[size_t(i)]) - double(b[size_t(i)]);
    sum += d * d;
  }
  return sum / double(fp.numel());
}

} // namespace ptq
