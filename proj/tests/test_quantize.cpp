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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/quantize.hpp"
#include "oracle.hpp"
#include "testutil.hpp"

using namespace ptq;

TEST_CASE("integer ranges") {
  const IntRange s4 = make_int_range(4, true);
  CHECK(s4.int_min == -8);
  CHECK(s4.int_max == 7);

  const IntRange u8 = make_int_range(8, false);
  CHECK(u8.int_min == 0);
  CHECK(u8.int_max == 255);

  const IntRange s1 = make_int_range(1, true);
  CHECK(s1.int_min == -1);
  CHECK(s1.int_max == 0);

  const IntRange u16 = make_int_range(16, false);
  CHECK(u16.int_max == 65535);

  CHECK_THROWS_AS(make_int_range(0, true), Error);
  CHECK_THROWS_AS(make_int_range(17, false), Error);
}

TEST_CASE("quantize_value examples") {
  const IntRange s4 = make_int_range(4, true);
  CHECK(quantize_value(0.0, 0.1, s4) == 0);
  CHECK(quantize_value(0.37, 0.1, s4) == 4);
  CHECK(quantize_value(5.0, 0.1, s4) == 7);   // clamps at int_max
  CHECK(quantize_value(-5.0, 0.1, s4) == -8); // clamps at int_min

  CHECK_THROWS_AS(quantize_value(1.0, 0.0, s4), Error);
  CHECK_THROWS_AS(quantize_value(1.0, -0.5, s4), Error);
  CHECK_THROWS_AS(quantize_value(std::nan(""), 0.1, s4), Error);
}

TEST_CASE("round ties go to even") {
  const IntRange s8 = make_int_range(8, true);
  CHECK(quantize_value(0.5, 1.0, s8) == 0);
  CHECK(quantize_value(1.5, 1.0, s8) == 2);
  CHECK(quantize_value(2.5, 1.0, s8) == 2);
  CHECK(quantize_value(-0.5, 1.0, s8) == 0);
  CHECK(quantize_value(-1.5, 1.0, s8) == -2);
}

TEST_CASE("dequantize_value") {
  CHECK(dequantize_value(4, 0.1) == doctest::Approx(0.4));
  CHECK(dequantize_value(0, 123.0) == 0.0);
  CHECK(dequantize_value(-8, 0.25) == -2.0);
}

TEST_CASE("fake_quantize_tensor examples") {
  QuantParams p;
  p.range = make_int_range(4, true);
  p.group = AxisGroup::whole();
  p.scales = {0.1};

  Tensor t({2}, {0.37f, 5.0f}, Layout::Vector);
  const Tensor q = fake_quantize_tensor(t, p);
  CHECK(q.data()[0] == doctest::Approx(0.4));
  CHECK(q.data()[1] == doctest::Approx(0.7));

  // Values already on the grid stay fixed.
  Tensor grid({3}, {0.1f, -0.8f, 0.7f}, Layout::Vector);
  const Tensor fixed = fake_quantize_tensor(grid, p);
  for (int i = 0; i < 3; ++i) CHECK(fixed.data()[size_t(i)] == grid.data()[size_t(i)]);
}

TEST_CASE("fake_quantize_tensor per-channel routing") {
  QuantParams p;
  p.range = make_int_range(4, true);
  p.group = AxisGroup::per_channel(0);
  p.scales = {0.1, 1.0};

  Tensor t({2, 1}, {0.37f, 3.7f}, Layout::Matrix);
  const Tensor q = fake_quantize_tensor(t, p);
  CHECK(q.data()[0] == doctest::Approx(0.4));
  CHECK(q.data()[1] == doctest::Approx(4.0));

  p.scales = {0.1};
  CHECK_THROWS_AS(fake_quantize_tensor(t, p), Error);
}

TEST_CASE("quant_mse examples") {
  Tensor a({2}, {0.0f, 1.0f}, Layout::Vector);
  CHECK(quant_mse(a, a) == 0.0);

  Tensor b({2}, {0.0f, 0.5f}, Layout::Vector);
  CHECK(quant_mse(a, b) == doctest::Approx(0.125));

  Tensor c({1}, {2.0f}, Layout::Vector);
  Tensor d({1}, {-2.0f}, Layout::Vector);
  CHECK(quant_mse(c, d) == doctest::Approx(16.0));

  Tensor e({3}, {0.0f, 0.0f, 0.0f}, Layout::Vector);
  CHECK_THROWS_AS(quant_mse(a, e), Error);
}

TEST_CASE("quant_mse is permutation invariant and non-negative") {
  Rng rng(3);
  Tensor a = testutil::random_tensor(rng, {64}, Layout::Vector);
  Tensor b = testutil::random_tensor(rng, {64}, Layout::Vector);
  const double m = quant_mse(a, b);
  CHECK(m >= 0.0);

  // Reverse both with the same permutation.
  std::vector<float> ar(a.data().rbegin(), a.data().rend());
  std::vector<float> br(b.data().rbegin(), b.data().rend());
  const double mr = quant_mse(Tensor({64}, std::move(ar), Layout::Vector),
                              Tensor({64}, std::move(br), Layout::Vector));
  CHECK(m == doctest::Approx(mr).epsilon(1e-12));
}

TEST_CASE("fake quantization matches the exhaustive grid oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 5000; ++trial) {
    const int bits = 1 + int(rng.below(8)); // deeper ranges run in acceptance
    const bool is_signed = rng.below(2) == 0;
    const IntRange r = make_int_range(bits, is_signed);
    const double s = rng.uniform_in(1e-3, 10.0);
    const double span = s * double(r.int_max - r.int_min + 2);
    const double x = rng.uniform_in(is_signed ? -span : -0.25 * span, span);

    const int32_t got = quantize_value(x, s, r);
    const int32_t want = oracle::nearest_grid_point(x, s, r);
    REQUIRE(got == want);
  }
}

TEST_CASE("idempotence: quantizing twice is the identity") {
  Rng rng(23);
  QuantParams p;
  p.range = make_int_range(5, true);
  p.group = AxisGroup::whole();
  p.scales = {0.013};
  Tensor t = testutil::random_tensor(rng, {512}, Layout::Vector, -0.4, 0.4);
  const Tensor once = fake_quantize_tensor(t, p);
  const Tensor twice = fake_quantize_tensor(once, p);
  for (int64_t i = 0; i < once.numel(); ++i)
    REQUIRE(once.data()[size_t(i)] == twice.data()[size_t(i)]);
}

TEST_CASE("quantize is monotone") {
  Rng rng(29);
  const IntRange r = make_int_range(6, true);
  for (int trial = 0; trial < 2000; ++trial) {
    const double s = rng.uniform_in(0.01, 2.0);
    double x = rng.uniform_in(-100.0, 100.0);
    double y = rng.uniform_in(-100.0, 100.0);
    if (x > y) std::swap(x, y);
    CHECK(quantize_value(x, s, r) <= quantize_value(y, s, r));
  }
}

TEST_CASE("in-range error is bounded by half a step") {
  Rng rng(31);
  const IntRange r = make_int_range(7, true);
  const double s = 0.05;
  QuantParams p{r, AxisGroup::whole(), {s}};
  for (int trial = 0; trial < 2000; ++trial) {
    const double x = rng.uniform_in(s * r.int_min, s * r.int_max);
    Tensor t({1}, {float(x)}, Layout::Vector);
    const Tensor q = fake_quantize_tensor(t, p);
    CHECK(std::fabs(double(t.data()[0]) - double(q.data()[0])) <=
          s / 2.0 + 1e-12);
  }
}

TEST_CASE("sign symmetry away from ties and the endpoint") {
  Rng rng(37);
  const IntRange r = make_int_range(6, true);
  const double s = 0.1;
  QuantParams p{r, AxisGroup::whole(), {s}};
  int checked = 0;
  while (checked < 1000) {
    const double x = rng.uniform_in(0.0, s * double(r.int_max));
    const double ratio = x / s;
    // Skip exact halves and the asymmetric endpoint region.
    if (std::fabs(ratio - std::floor(ratio) - 0.5) < 1e-6) continue;
    if (std::nearbyint(ratio) >= double(r.int_max)) continue;
    Tensor pos({1}, {float(x)}, Layout::Vector);
    Tensor neg({1}, {float(-x)}, Layout::Vector);
    const float qp = fake_quantize_tensor(pos, p).data()[0];
    const float qn = fake_quantize_tensor(neg, p).data()[0];
    REQUIRE(qp == -qn);
    checked++;
  }
}

TEST_CASE("count_clamp_events") {
  QuantParams p{make_int_range(4, true), AxisGroup::whole(), {0.1}};
  Tensor t({3}, {0.37f, 5.0f, -0.69f}, Layout::Vector);
  CHECK(count_clamp_events(t, p) == 1);
}
