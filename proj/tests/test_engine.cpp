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

#include "core/engine.hpp"
#include "core/fixtures.hpp"
#include "core/tensor_io.hpp"
#include "oracle.hpp"
#include "testutil.hpp"

using namespace ptq;

namespace {

FixtureSpec tiny_spec() {
  FixtureSpec spec;
  spec.seed = 9;
  spec.in_c = 3;
  spec.in_h = 8;
  spec.in_w = 8;
  spec.widths = {4, 8};
  spec.classes = 4;
  spec.dataset_size = 48;
  return spec;
}

ModelGraph one_node_graph(Node compute, TensorStore tensors,
                          std::array<int64_t, 3> chw) {
  ModelGraph g;
  Node in;
  in.id = "in";
  in.kind = NodeKind::Input;
  in.input_chw = chw;
  g.nodes.push_back(in);
  compute.id = "op";
  compute.inputs = {"in"};
  g.nodes.push_back(compute);
  Node out;
  out.id = "out";
  out.kind = NodeKind::Output;
  out.inputs = {"op"};
  g.nodes.push_back(out);
  g.tensors = std::move(tensors);
  return g;
}

} // namespace

TEST_CASE("relu kernel") {
  Node relu;
  relu.kind = NodeKind::ReLU;
  const ModelGraph g = one_node_graph(relu, {}, {1, 1, 2});
  Tensor x({1, 1, 1, 2}, {-1.0f, 2.0f}, Layout::ActNCHW);
  const Tensor y = forward(g, x, ExecMode::Float);
  CHECK(y.data()[0] == 0.0f);
  CHECK(y.data()[1] == 2.0f);
}

TEST_CASE("convolution matches the naive oracle bit for bit") {
  Rng rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const int64_t C = 1 + int64_t(rng.below(4));
    const int64_t O = 1 + int64_t(rng.below(4));
    const int64_t H = 4 + int64_t(rng.below(6));
    const int64_t W = 4 + int64_t(rng.below(6));
    const int64_t K = 1 + 2 * int64_t(rng.below(2)); // 1 or 3
    const int stride = 1 + int(rng.below(2));
    const int pad = int(rng.below(2));
    const int64_t N = 1 + int64_t(rng.below(3));

    const Tensor x =
        testutil::random_tensor(rng, {N, C, H, W}, Layout::ActNCHW);
    const Tensor w =
        testutil::random_tensor(rng, {O, C, K, K}, Layout::WeightOIHW);
    const Tensor b = testutil::random_tensor(rng, {O}, Layout::Vector);

    Node conv;
    conv.kind = NodeKind::Conv2D;
    conv.weight = "w";
    conv.bias = "b";
    conv.stride = stride;
    conv.pad = pad;
    TensorStore store;
    store["w"] = std::make_shared<Tensor>(w);
    store["b"] = std::make_shared<Tensor>(b);
    const ModelGraph g = one_node_graph(conv, std::move(store), {C, H, W});

    const Tensor got = forward(g, x, ExecMode::Float);
    const Tensor want = oracle::conv2d_naive(x, w, &b, stride, pad);
    // forward() flattens the final activation to (N, features).
    REQUIRE(got.numel() == want.numel());
    for (int64_t i = 0; i < got.numel(); ++i)
      REQUIRE(got.data()[size_t(i)] == want.data()[size_t(i)]);
  }
}

TEST_CASE("pooling kernels") {
  Node pool;
  pool.kind = NodeKind::MaxPool;
  pool.kernel_h = 2;
  pool.kernel_w = 2;
  pool.stride = 2;
  const ModelGraph g = one_node_graph(pool, {}, {1, 2, 2});
  Tensor x({1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}, Layout::ActNCHW);
  CHECK(forward(g, x, ExecMode::Float).data()[0] == 4.0f);

  Node avg;
  avg.kind = NodeKind::AvgPool;
  avg.kernel_h = 2;
  avg.kernel_w = 2;
  avg.stride = 2;
  const ModelGraph g2 = one_node_graph(avg, {}, {1, 2, 2});
  CHECK(forward(g2, x, ExecMode::Float).data()[0] == doctest::Approx(2.5));
}

TEST_CASE("fully connected kernel") {
  Node fc;
  fc.kind = NodeKind::FullyConnected;
  fc.weight = "w";
  fc.bias = "b";
  TensorStore store;
  store["w"] = std::make_shared<Tensor>(
      std::vector<int64_t>{2, 3}, std::vector<float>{1, 0, 2, 0, 1, -1},
      Layout::Matrix);
  store["b"] = std::make_shared<Tensor>(std::vector<int64_t>{2},
                                        std::vector<float>{0.5f, 0.0f},
                                        Layout::Vector);
  const ModelGraph g = one_node_graph(fc, std::move(store), {3, 1, 1});
  Tensor x({1, 3, 1, 1}, {1.0f, 2.0f, 3.0f}, Layout::ActNCHW);
  const Tensor y = forward(g, x, ExecMode::Float);
  CHECK(y.data()[0] == doctest::Approx(7.5)); // 1 + 6 + 0.5
  CHECK(y.data()[1] == doctest::Approx(-1.0));
}

TEST_CASE("float forward is batch-size invariant") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = gen_toy_model(spec);
  Rng rng(103);
  const Tensor batch = testutil::random_tensor(
      rng, {5, spec.in_c, spec.in_h, spec.in_w}, Layout::ActNCHW, 0.0, 1.0);

  const Tensor all = forward(g, batch, ExecMode::Float);
  for (int64_t n = 0; n < 5; ++n) {
    const Tensor single = gather_samples(batch, {n});
    const Tensor one = forward(g, single, ExecMode::Float);
    for (int64_t k = 0; k < one.dim(1); ++k)
      REQUIRE(one.data()[size_t(k)] ==
              all.data()[size_t(n * all.dim(1) + k)]);
  }

  // forward_all with small batches equals one big forward.
  const Tensor chunked = forward_all(g, batch, ExecMode::Float, nullptr, 2);
  for (int64_t i = 0; i < all.numel(); ++i)
    REQUIRE(chunked.data()[size_t(i)] == all.data()[size_t(i)]);
}

TEST_CASE("golden fixture pair reproduces bit for bit") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = gen_toy_model(spec);
  const GoldenPair gp = gen_golden(spec, g);
  const Tensor logits = forward(g, gp.input, ExecMode::Float);
  REQUIRE(logits.numel() == gp.logits.numel());
  for (int64_t i = 0; i < logits.numel(); ++i)
    REQUIRE(logits.data()[size_t(i)] == gp.logits.data()[size_t(i)]);
}

TEST_CASE("calibrate mode returns float outputs and collects stats") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph folded = fold_batchnorm(gen_toy_model(spec));
  QuantPlan plan;
  plan.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.residual = ResidualMode::QRes;
  const ModelGraph planned = insert_quant_nodes(folded, plan);

  Rng rng(107);
  const Tensor x = testutil::random_tensor(
      rng, {3, spec.in_c, spec.in_h, spec.in_w}, Layout::ActNCHW, 0.0, 1.0);

  CalibContext ctx;
  ctx.seed = 11;
  const Tensor calibrated = forward(planned, x, ExecMode::Calibrate, &ctx);
  const Tensor floated = forward(planned, x, ExecMode::Float);
  for (int64_t i = 0; i < floated.numel(); ++i)
    REQUIRE(calibrated.data()[size_t(i)] == floated.data()[size_t(i)]);

  int quant_sites = 0;
  for (const auto& n : planned.nodes)
    if (n.kind == NodeKind::Quant) quant_sites++;
  CHECK(int(ctx.stats.size()) == quant_sites);
  for (const auto& [site, st] : ctx.stats) {
    CHECK(!st.empty());
    CHECK(st.groups()[0].count > 0);
  }

  CHECK_THROWS_AS(forward(planned, x, ExecMode::Calibrate, nullptr), Error);
}

TEST_CASE("activation quant sites only ever see non-negative values") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph folded = fold_batchnorm(gen_toy_model(spec));
  QuantPlan plan;
  plan.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.residual = ResidualMode::QRes;
  const ModelGraph planned = insert_quant_nodes(folded, plan);
  const Dataset ds = gen_dataset(spec, gen_toy_model(spec));

  auto stats = run_calibration(planned, ds.images, 32, 5);
  for (const auto& n : planned.nodes) {
    if (n.kind != NodeKind::Quant || n.qtag != QuantTag::Activation) continue;
    CHECK(stats.at(n.id).groups()[0].min >= 0.0);
  }
}

TEST_CASE("fake-quant mode demands resolved parameters") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph folded = fold_batchnorm(gen_toy_model(spec));
  QuantPlan plan;
  plan.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
  const ModelGraph planned = insert_quant_nodes(folded, plan);
  Rng rng(109);
  const Tensor x = testutil::random_tensor(
      rng, {1, spec.in_c, spec.in_h, spec.in_w}, Layout::ActNCHW, 0.0, 1.0);
  CHECK_THROWS_AS(forward(planned, x, ExecMode::FakeQuant), Error);
}

TEST_CASE("run_calibration is deterministic and validates sizes") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = gen_toy_model(spec);
  const ModelGraph folded = fold_batchnorm(g);
  QuantPlan plan;
  plan.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
  plan.residual = ResidualMode::QRes;
  const ModelGraph planned = insert_quant_nodes(folded, plan);
  const Dataset ds = gen_dataset(spec, g);

  auto s1 = run_calibration(planned, ds.images, 16, 42);
  auto s2 = run_calibration(planned, ds.images, 16, 42);
  REQUIRE(s1.size() == s2.size());
  for (const auto& [site, st] : s1) {
    const auto& other = s2.at(site);
    CHECK(st.groups()[0].min == other.groups()[0].min);
    CHECK(st.groups()[0].max == other.groups()[0].max);
    CHECK(st.groups()[0].sum == other.groups()[0].sum);
    CHECK(st.reservoirs()[0].values() == other.reservoirs()[0].values());
  }

  // Different seed, different sample.
  auto s3 = run_calibration(planned, ds.images, 16, 43);
  bool any_diff = false;
  for (const auto& [site, st] : s1)
    if (st.groups()[0].sum != s3.at(site).groups()[0].sum) any_diff = true;
  CHECK(any_diff);

  // sample_size == dataset size uses every input exactly once.
  auto all1 = run_calibration(planned, ds.images, spec.dataset_size, 1);
  auto all2 = run_calibration(planned, ds.images, spec.dataset_size, 2);
  for (const auto& [site, st] : all1) {
    CHECK(st.groups()[0].sum == doctest::Approx(all2.at(site).groups()[0].sum)
                                    .epsilon(1e-12));
    CHECK(st.groups()[0].count == all2.at(site).groups()[0].count);
  }

  CHECK_THROWS_AS(run_calibration(planned, ds.images, 0, 1), Error);
  CHECK_THROWS_AS(
      run_calibration(planned, ds.images, spec.dataset_size + 1, 1), Error);
}

TEST_CASE("16-bit AbsMax fake quantization tracks the float forward") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = gen_toy_model(spec);
  const Dataset ds = gen_dataset(spec, g);
  const ModelGraph folded = fold_batchnorm(g);

  auto quantize_at = [&](int bits) {
    QuantPlan plan;
    plan.wl_w = bits;
    plan.wl_a = bits;
    plan.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
    plan.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
    plan.weight_group = AxisGroup::per_channel(0);
    plan.residual = ResidualMode::FpRes;
    ModelGraph planned = insert_quant_nodes(folded, plan);
    auto stats = run_calibration(planned, ds.images, 32, 3);
    CalibrationProfile profile;
    for (const auto& n : planned.nodes)
      if (n.kind == NodeKind::Quant)
        profile.sites.push_back(SiteProfile::from_stats(
            n.id, "act", stats.at(n.id), {99.99, 100.0}));
    return quantize_weights(resolve_activation_scales(planned, profile));
  };

  Rng rng(113);
  const Tensor x = testutil::random_tensor(
      rng, {4, spec.in_c, spec.in_h, spec.in_w}, Layout::ActNCHW, 0.0, 1.0);
  const Tensor fl = forward(folded, x, ExecMode::Float);

  double prev_err = std::numeric_limits<double>::infinity();
  for (int bits : {4, 8, 12, 16}) {
    const Tensor q = forward(quantize_at(bits), x, ExecMode::FakeQuant);
    double max_err = 0.0;
    for (int64_t i = 0; i < fl.numel(); ++i)
      max_err = std::max(max_err, std::fabs(double(q.data()[size_t(i)]) -
                                            double(fl.data()[size_t(i)])));
    CHECK(max_err < prev_err);
    prev_err = max_err;
    if (bits == 16) CHECK(max_err < 1e-2);
  }
}
