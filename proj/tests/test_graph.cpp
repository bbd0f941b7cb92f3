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

#include "core/engine.hpp"
#include "core/fixtures.hpp"
#include "core/graph.hpp"
#include "core/model_io.hpp"
#include "testutil.hpp"

using namespace ptq;

namespace {

FixtureSpec tiny_spec() {
  FixtureSpec spec;
  spec.seed = 3;
  spec.in_c = 3;
  spec.in_h = 8;
  spec.in_w = 8;
  spec.widths = {4, 8};
  spec.classes = 4;
  spec.dataset_size = 32;
  return spec;
}

int count_kind(const ModelGraph& g, NodeKind k) {
  return int(std::count_if(g.nodes.begin(), g.nodes.end(),
                           [k](const Node& n) { return n.kind == k; }));
}

QuantPlan basic_plan(ResidualMode res = ResidualMode::FpRes) {
  QuantPlan p;
  p.wl_w = 8;
  p.wl_a = 8;
  p.weight_method = {ScaleMethod::Kind::AbsMax, 99.99};
  p.act_method = {ScaleMethod::Kind::AbsMax, 99.99};
  p.weight_group = AxisGroup::per_channel(0);
  p.residual = res;
  return p;
}

} // namespace

TEST_CASE("the toy fixture validates cleanly") {
  const ModelGraph g = gen_toy_model(tiny_spec());
  CHECK(validate_graph(g).empty());
}

TEST_CASE("validation reports arity violations with node ids") {
  ModelGraph g = gen_toy_model(tiny_spec());
  for (auto& n : g.nodes)
    if (n.kind == NodeKind::Add) n.inputs.pop_back();
  const auto errors = validate_graph(g);
  REQUIRE(!errors.empty());
  CHECK(errors[0].find("b0.add") != std::string::npos);
  CHECK(errors[0].find("2 inputs") != std::string::npos);
}

TEST_CASE("validation reports missing weight tensors") {
  ModelGraph g = gen_toy_model(tiny_spec());
  g.tensors.erase("stem.w");
  const auto errors = validate_graph(g);
  REQUIRE(!errors.empty());
  CHECK(errors[0].find("stem") != std::string::npos);
  CHECK(errors[0].find("weight") != std::string::npos);
}

TEST_CASE("validation rejects forward references") {
  ModelGraph g = gen_toy_model(tiny_spec());
  std::swap(g.nodes[1], g.nodes[2]);
  CHECK(!validate_graph(g).empty());
}

TEST_CASE("identity batch norm folds to unchanged weights") {
  ModelGraph g;
  Node in;
  in.id = "in";
  in.kind = NodeKind::Input;
  in.input_chw = {1, 2, 2};
  g.nodes.push_back(in);

  Node conv;
  conv.id = "c";
  conv.kind = NodeKind::Conv2D;
  conv.inputs = {"in"};
  conv.weight = "c.w";
  conv.stride = 1;
  conv.pad = 0;
  g.nodes.push_back(conv);
  g.tensors["c.w"] = std::make_shared<Tensor>(
      std::vector<int64_t>{1, 1, 1, 1}, std::vector<float>{2.0f},
      Layout::WeightOIHW);

  Node bn;
  bn.id = "bn";
  bn.kind = NodeKind::BatchNorm;
  bn.inputs = {"c"};
  bn.bn_gamma = "bn.g";
  bn.bn_beta = "bn.b";
  bn.bn_mean = "bn.m";
  bn.bn_var = "bn.v";
  bn.bn_eps = 0.0;
  g.nodes.push_back(bn);
  auto vec1 = [](float v) {
    return std::make_shared<Tensor>(std::vector<int64_t>{1},
                                    std::vector<float>{v}, Layout::Vector);
  };
  g.tensors["bn.g"] = vec1(1.0f);
  g.tensors["bn.b"] = vec1(0.0f);
  g.tensors["bn.m"] = vec1(0.0f);
  g.tensors["bn.v"] = vec1(1.0f);

  Node out;
  out.id = "out";
  out.kind = NodeKind::Output;
  out.inputs = {"bn"};
  g.nodes.push_back(out);

  SUBCASE("identity parameters keep the weight") {
    const ModelGraph folded = fold_batchnorm(g);
    CHECK(count_kind(folded, NodeKind::BatchNorm) == 0);
    CHECK(folded.tensor("c.w").data()[0] == 2.0f);
    CHECK(folded.bn_folded);
    // BN's consumer now reads from the conv.
    CHECK(folded.find("out")->inputs[0] == "c");
  }

  SUBCASE("gamma and variance rescale the weight") {
    // w=2, gamma=3, var=4, eps=0, mean=0, beta=0 -> folded weight 3.
    g.tensors["bn.g"] = vec1(3.0f);
    g.tensors["bn.v"] = vec1(4.0f);
    const ModelGraph folded = fold_batchnorm(g);
    CHECK(folded.tensor("c.w").data()[0] == doctest::Approx(3.0));
  }

  SUBCASE("bn after non-foldable node errors") {
    g.nodes[2].inputs = {"in"};
    CHECK_THROWS_WITH_AS(fold_batchnorm(g),
                         doctest::Contains("directly follow"), Error);
  }
}

TEST_CASE("graphs without BN fold to themselves") {
  ModelGraph g = gen_toy_model(tiny_spec());
  ModelGraph folded = fold_batchnorm(g);
  ModelGraph again = fold_batchnorm(folded);
  CHECK(again.nodes.size() == folded.nodes.size());
}

TEST_CASE("fold preserves float outputs within 1e-4 relative") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = gen_toy_model(spec);
  const ModelGraph folded = fold_batchnorm(g);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = testutil::random_tensor(
        rng, {2, spec.in_c, spec.in_h, spec.in_w}, Layout::ActNCHW, 0.0, 1.0);
    const Tensor a = forward(g, x, ExecMode::Float);
    const Tensor b = forward(folded, x, ExecMode::Float);
    for (int64_t i = 0; i < a.numel(); ++i) {
      const double av = a.data()[size_t(i)], bv = b.data()[size_t(i)];
      const double tol = 1e-4 * std::max({1.0, std::fabs(av), std::fabs(bv)});
      REQUIRE(std::fabs(av - bv) <= tol);
    }
  }
}

TEST_CASE("quant node insertion places input, relu, and optional add sites") {
  const ModelGraph g = fold_batchnorm(gen_toy_model(tiny_spec()));
  const int relus = count_kind(g, NodeKind::ReLU);
  const int adds = count_kind(g, NodeKind::Add);
  REQUIRE(adds == 2); // one per block

  const ModelGraph fp = insert_quant_nodes(g, basic_plan(ResidualMode::FpRes));
  CHECK(count_kind(fp, NodeKind::Quant) == 1 + relus);

  const ModelGraph qr = insert_quant_nodes(g, basic_plan(ResidualMode::QRes));
  CHECK(count_kind(qr, NodeKind::Quant) == 1 + relus + adds);

  // The two plans differ exactly by the Add-output quant set.
  std::vector<std::string> fp_sites, qr_sites;
  for (const auto& n : fp.nodes)
    if (n.kind == NodeKind::Quant) fp_sites.push_back(n.id);
  for (const auto& n : qr.nodes)
    if (n.kind == NodeKind::Quant) qr_sites.push_back(n.id);
  for (const auto& s : fp_sites)
    CHECK(std::find(qr_sites.begin(), qr_sites.end(), s) != qr_sites.end());
  for (const auto& s : qr_sites)
    if (std::find(fp_sites.begin(), fp_sites.end(), s) == fp_sites.end())
      CHECK(s.find(".add") != std::string::npos);

  // Inserting into an already-planned graph is an error, not a no-op.
  CHECK_THROWS_WITH_AS(insert_quant_nodes(fp, basic_plan()),
                       doctest::Contains("already"), Error);
}

TEST_CASE("insertion requires folded graphs and valid plans") {
  const ModelGraph g = gen_toy_model(tiny_spec());
  CHECK_THROWS_WITH_AS(insert_quant_nodes(g, basic_plan()),
                       doctest::Contains("fold"), Error);

  QuantPlan bad = basic_plan();
  bad.act_method.kind = ScaleMethod::Kind::LSQPlus;
  CHECK_THROWS_AS(insert_quant_nodes(fold_batchnorm(g), bad), Error);

  QuantPlan bad2 = basic_plan();
  bad2.weight_method.kind = ScaleMethod::Kind::BatchQuant;
  CHECK_THROWS_AS(insert_quant_nodes(fold_batchnorm(g), bad2), Error);
}

TEST_CASE("float semantics are untouched by unresolved quant nodes") {
  const FixtureSpec spec = tiny_spec();
  const ModelGraph g = fold_batchnorm(gen_toy_model(spec));
  const ModelGraph planned = insert_quant_nodes(g, basic_plan());
  Rng rng(7);
  const Tensor x = testutil::random_tensor(
      rng, {2, spec.in_c, spec.in_h, spec.in_w}, Layout::ActNCHW, 0.0, 1.0);
  const Tensor a = forward(g, x, ExecMode::Float);
  const Tensor b = forward(planned, x, ExecMode::Float);
  for (int64_t i = 0; i < a.numel(); ++i)
    REQUIRE(a.data()[size_t(i)] == b.data()[size_t(i)]);
}

TEST_CASE("weight quantization records per-layer MSE and flips the flag") {
  const ModelGraph g = fold_batchnorm(gen_toy_model(tiny_spec()));
  ModelGraph planned = insert_quant_nodes(g, basic_plan());
  const ModelGraph quantized = quantize_weights(planned);
  CHECK(quantized.quantized);
  CHECK(!quantized.weight_mse.empty());
  for (const auto& [layer, mse] : quantized.weight_mse) {
    CHECK(mse >= 0.0);
    CHECK(quantized.find(layer) != nullptr);
  }
  CHECK_THROWS_WITH_AS(quantize_weights(quantized),
                       doctest::Contains("already"), Error);
}

TEST_CASE("models round-trip through manifests") {
  const ModelGraph g = gen_toy_model(tiny_spec());
  testutil::TempDir dir("model");
  save_model(g, dir.file("m.ptqm"));
  const ModelGraph back = load_model(dir.file("m.ptqm"));

  REQUIRE(back.nodes.size() == g.nodes.size());
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    CHECK(back.nodes[i].id == g.nodes[i].id);
    CHECK(back.nodes[i].kind == g.nodes[i].kind);
    CHECK(back.nodes[i].inputs == g.nodes[i].inputs);
  }
  REQUIRE(back.tensors.size() == g.tensors.size());
  for (const auto& [name, t] : g.tensors) {
    const Tensor& u = *back.tensors.at(name);
    REQUIRE(u.numel() == t->numel());
    for (int64_t i = 0; i < t->numel(); ++i)
      REQUIRE(u.data()[size_t(i)] == t->data()[size_t(i)]);
  }

  // Saving the reload is byte-identical (deterministic emission).
  save_model(back, dir.file("m2.ptqm"));
  CHECK(testutil::same_bytes(dir.file("m.ptqm"), dir.file("m2.ptqm")));
  CHECK(testutil::same_bytes(dir.file("m.ptqt"), dir.file("m2.ptqt")));
}

TEST_CASE("manifest version and corruption guards") {
  const ModelGraph g = gen_toy_model(tiny_spec());
  testutil::TempDir dir("badmodel");
  save_model(g, dir.file("m.ptqm"));

  SUBCASE("future manifest version") {
    std::ofstream out(dir.file("v2.ptqm"));
    out << "ptqmodel v2\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_model(dir.file("v2.ptqm")),
                         doctest::Contains("unsupported"), Error);
  }

  SUBCASE("dangling tensor reference") {
    // Rewrite the manifest to reference a tensor that is not in the store.
    auto lines = testutil::read_bytes(dir.file("m.ptqm"));
    std::string text(lines.begin(), lines.end());
    const auto pos = text.find("weight=stem.w");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 13, "weight=stem.x");
    std::ofstream out(dir.file("dangling.ptqm"));
    out << text;
    out.close();
    std::filesystem::copy_file(dir.file("m.ptqt"), dir.file("dangling.ptqt"));
    CHECK_THROWS_WITH_AS(load_model(dir.file("dangling.ptqm")),
                         doctest::Contains("stem.x"), Error);
  }
}

TEST_CASE("quantized models round-trip with plan and scales") {
  const ModelGraph g = gen_toy_model(tiny_spec());
  const Dataset ds = gen_dataset(tiny_spec(), g);

  ModelGraph folded = fold_batchnorm(g);
  ModelGraph planned = insert_quant_nodes(folded, basic_plan(ResidualMode::QRes));

  // Resolve from a real calibration pass.
  auto stats = run_calibration(planned, ds.images, 16, 0);
  CalibrationProfile profile;
  for (const auto& n : planned.nodes)
    if (n.kind == NodeKind::Quant)
      profile.sites.push_back(SiteProfile::from_stats(
          n.id, n.qtag == QuantTag::Residual ? "res" : "act",
          stats.at(n.id), {99.99, 100.0}));

  ModelGraph resolved = resolve_activation_scales(planned, profile);
  ModelGraph quantized = quantize_weights(resolved);

  testutil::TempDir dir("qmodel");
  save_model(quantized, dir.file("q.ptqm"));
  const ModelGraph back = load_model(dir.file("q.ptqm"));
  CHECK(back.quantized);
  REQUIRE(back.plan.has_value());
  CHECK(back.plan->wl_w == 8);
  CHECK(back.weight_mse.size() == quantized.weight_mse.size());
  for (const auto& n : back.nodes)
    if (n.kind == NodeKind::Quant) {
      CHECK(n.q_resolved);
      REQUIRE(n.q_params.scales.size() == 1);
      const Node* orig = quantized.find(n.id);
      CHECK(n.q_params.scales[0] == orig->q_params.scales[0]);
    }

  // Missing profile sites are reported.
  CalibrationProfile empty;
  CHECK_THROWS_WITH_AS(resolve_activation_scales(planned, empty),
                       doctest::Contains("no site"), Error);
}
