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
#include <limits>

#include "core/tensor.hpp"
#include "testutil.hpp"

using namespace ptq;

TEST_CASE("tensor construction enforces invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>{1.0f}, Layout::Matrix),
                  Error);
  CHECK_THROWS_AS(Tensor({0}, Layout::Vector), Error);
  CHECK_THROWS_AS(
      Tensor({1}, {std::numeric_limits<float>::quiet_NaN()}, Layout::Vector),
      Error);
  CHECK_THROWS_AS(
      Tensor({1}, {std::numeric_limits<float>::infinity()}, Layout::Vector),
      Error);

  Tensor t({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}, Layout::Matrix);
  CHECK(t.numel() == 4);
  CHECK(t.rank() == 2);
}

TEST_CASE("reduce_stats whole tensor") {
  Tensor t({2}, {1.0f, -1.0f}, Layout::Vector);
  const auto s = reduce_stats(t, AxisGroup::whole());
  REQUIRE(s.groups.size() == 1);
  CHECK(s.groups[0].min == -1.0);
  CHECK(s.groups[0].max == 1.0);
  CHECK(s.groups[0].abs_mean == 1.0);
  CHECK(s.groups[0].mean == 0.0);
  CHECK(s.groups[0].abs_max == 1.0);
}

TEST_CASE("reduce_stats zero tensor") {
  Tensor t({4}, {0.0f, 0.0f, 0.0f, 0.0f}, Layout::Vector);
  const auto s = reduce_stats(t, AxisGroup::whole());
  CHECK(s.groups[0].abs_max == 0.0);
  CHECK(s.groups[0].stddev == 0.0);
}

TEST_CASE("reduce_stats per channel") {
  // (2,2) matrix, channel axis 0: groups {1,2} and {3,4}.
  Tensor t({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}, Layout::Matrix);
  const auto s = reduce_stats(t, AxisGroup::per_channel(0));
  REQUIRE(s.groups.size() == 2);
  CHECK(s.groups[0].abs_max == 2.0);
  CHECK(s.groups[1].abs_max == 4.0);
}

TEST_CASE("reduce_stats rejects bad input") {
  Tensor t({2}, {1.0f, 2.0f}, Layout::Vector);
  CHECK_THROWS_WITH_AS(reduce_stats(t, AxisGroup::per_channel(3)),
                       doctest::Contains("axis"), Error);
}

TEST_CASE("percentile_abs examples") {
  Tensor a({2}, {-3.0f, 1.0f}, Layout::Vector);
  CHECK(percentile_abs(a, 100.0, AxisGroup::whole())[0] == 3.0);

  Tensor b({4}, {0.0f, 1.0f, 2.0f, 3.0f}, Layout::Vector);
  CHECK(percentile_abs(b, 50.0, AxisGroup::whole())[0] == doctest::Approx(1.5));

  Tensor c({1}, {5.0f}, Layout::Vector);
  CHECK(percentile_abs(c, 0.0, AxisGroup::whole())[0] == 5.0);
  CHECK(percentile_abs(c, 37.5, AxisGroup::whole())[0] == 5.0);
  CHECK(percentile_abs(c, 100.0, AxisGroup::whole())[0] == 5.0);

  CHECK_THROWS_AS(percentile_abs(b, -1.0, AxisGroup::whole()), Error);
  CHECK_THROWS_AS(percentile_abs(b, 100.5, AxisGroup::whole()), Error);
}

TEST_CASE("percentile at 100 equals abs_max on random tensors") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t n = 1 + int64_t(rng.below(64));
    Tensor t = testutil::random_tensor(rng, {n}, Layout::Vector, -5.0, 5.0);
    const auto s = reduce_stats(t, AxisGroup::whole());
    const auto p = percentile_abs(t, 100.0, AxisGroup::whole());
    CHECK(p[0] == s.groups[0].abs_max);
  }
}

TEST_CASE("percentile is monotone in k") {
  Rng rng(11);
  Tensor t = testutil::random_tensor(rng, {257}, Layout::Vector, -2.0, 2.0);
  double prev = -1.0;
  for (double k = 0.0; k <= 100.0; k += 2.5) {
    const double v = percentile_abs(t, k, AxisGroup::whole())[0];
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("per-channel stats are consistent with whole-tensor stats") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t =
        testutil::random_tensor(rng, {4, 3, 5, 5}, Layout::WeightOIHW, -3.0, 3.0);
    const auto whole = reduce_stats(t, AxisGroup::whole()).groups[0];
    const auto per = reduce_stats(t, AxisGroup::per_channel(0));
    REQUIRE(per.groups.size() == 4);
    double mn = per.groups[0].min, mx = per.groups[0].max, am = 0.0;
    int64_t count = 0;
    for (const auto& g : per.groups) {
      mn = std::min(mn, g.min);
      mx = std::max(mx, g.max);
      am = std::max(am, g.abs_max);
      count += g.count;
      CHECK(g.min <= g.mean);
      CHECK(g.mean <= g.max);
      CHECK(g.stddev >= 0.0);
      CHECK(g.abs_max == std::max(std::fabs(g.min), std::fabs(g.max)));
    }
    CHECK(mn == whole.min);
    CHECK(mx == whole.max);
    CHECK(am == whole.abs_max);
    CHECK(count == whole.count);
  }
}

TEST_CASE("empty tensors are rejected everywhere") {
  CHECK_THROWS_AS(Tensor({}, std::vector<float>{}, Layout::Vector), Error);
}
