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

#include <algorithm>
#include <set>

#include "core/engine.hpp"
#include "core/fixtures.hpp"
#include "core/metrics.hpp"
#include "testutil.hpp"

using namespace ptq;

namespace {

FixtureSpec tiny_spec(uint64_t seed = 21) {
  FixtureSpec spec;
  spec.seed = seed;
  spec.in_c = 3;
  spec.in_h = 8;
  spec.in_w = 8;
  spec.widths = {4, 8};
  spec.classes = 4;
  spec.dataset_size = 64;
  return spec;
}

} // namespace

TEST_CASE("fixture generation is deterministic at the byte level") {
  testutil::TempDir a("fix_a");
  testutil::TempDir b("fix_b");
  write_fixture_files(tiny_spec(), a.path());
  write_fixture_files(tiny_spec(), b.path());
  for (const char* name : {"model.ptqm", "model.ptqt", "dataset.ptqt",
                           "dataset.ptqt.labels", "golden.ptqt"})
    CHECK(testutil::same_bytes(a.file(name), b.file(name)));

  // A different seed produces different weights.
  testutil::TempDir c("fix_c");
  write_fixture_files(tiny_spec(22), c.path());
  CHECK(!testutil::same_bytes(a.file("model.ptqt"), c.file("model.ptqt")));
}

TEST_CASE("block count drives the Add node count") {
  for (int blocks = 1; blocks <= 3; ++blocks) {
    FixtureSpec spec = tiny_spec();
    spec.widths.assign(size_t(blocks), 4);
    const ModelGraph g = gen_toy_model(spec);
    const int adds = int(std::count_if(
        g.nodes.begin(), g.nodes.end(),
        [](const Node& n) { return n.kind == NodeKind::Add; }));
    CHECK(adds == blocks);
  }
}

TEST_CASE("fixture spec validation") {
  FixtureSpec spec = tiny_spec();
  spec.widths = {};
  CHECK_THROWS_AS(gen_toy_model(spec), Error);
  spec.widths = {4, 4, 4, 4, 4};
  CHECK_THROWS_AS(gen_toy_model(spec), Error);
  spec = tiny_spec();
  spec.classes = 1;
  CHECK_THROWS_AS(gen_toy_model(spec), Error);
}

TEST_CASE("float model scores 1.0 on its own dataset") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = gen_toy_model(spec);
  const Dataset ds = gen_dataset(spec, g);
  const Tensor logits = forward_all(g, ds.images, ExecMode::Float);
  CHECK(top1_accuracy(logits, ds.labels) == 1.0);
}

TEST_CASE("every class appears in a large-enough dataset") {
  FixtureSpec spec = tiny_spec();
  spec.dataset_size = 50 * spec.classes;
  const ModelGraph g = gen_toy_model(spec);
  const Dataset ds = gen_dataset(spec, g);
  std::set<uint32_t> seen(ds.labels.begin(), ds.labels.end());
  CHECK(int(seen.size()) == spec.classes);
}

TEST_CASE("golden pair ships with the fixture files") {
  testutil::TempDir dir("fix_golden");
  write_fixture_files(tiny_spec(), dir.path());
  const ModelGraph g = load_model(dir.file("model.ptqm"));
  const TensorStore golden = load_tensors(dir.file("golden.ptqt"));
  const Tensor logits = forward(g, *golden.at("input"), ExecMode::Float);
  REQUIRE(logits.numel() == golden.at("logits")->numel());
  for (int64_t i = 0; i < logits.numel(); ++i)
    REQUIRE(logits.data()[size_t(i)] == golden.at("logits")->data()[size_t(i)]);
}

TEST_CASE("heavy-tailed weights let AbsP clip outliers") {
  FixtureSpec spec = tiny_spec();
  spec.heavy_tailed = true;
  const ModelGraph g = gen_toy_model(spec);

  // With 1% x10 outliers, a 99th-percentile scale sits well below AbsMax.
  bool any_clipped = false;
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::Conv2D) continue;
    const Tensor& w = g.tensor(n.weight);
    const auto absmax = compute_weight_quant_params(
        w, {ScaleMethod::Kind::AbsMax, 99.99}, AxisGroup::whole(), 8);
    const auto absp = compute_weight_quant_params(
        w, {ScaleMethod::Kind::AbsP, 99.0}, AxisGroup::whole(), 8);
    CHECK(absp.scales[0] <= absmax.scales[0]);
    if (absp.scales[0] < 0.6 * absmax.scales[0]) any_clipped = true;
  }
  CHECK(any_clipped);
}
