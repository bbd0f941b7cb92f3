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

#include "core/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <set>

#include "core/engine.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"

namespace ptq {

void FixtureSpec::validate() const {
  if (in_c <= 0 || in_h <= 0 || in_w <= 0)
    fail(ErrorCode::InvalidArgument, "fixture input size must be positive");
  if (widths.empty() || widths.size() > 4)
    fail(ErrorCode::InvalidArgument, "fixture block count must be in [1, 4]");
  for (int w : widths)
    if (w <= 0) fail(ErrorCode::InvalidArgument, "channel widths must be positive");
  if (classes <= 1)
    fail(ErrorCode::InvalidArgument, "fixture needs at least two classes");
  if (dataset_size <= 0)
    fail(ErrorCode::InvalidArgument, "dataset size must be positive");
  int downsample = 1;
  for (size_t i = 1; i < widths.size(); ++i)
    if (widths[i] != widths[i - 1]) downsample *= 2;
  if (in_h / downsample < 1 || in_w / downsample < 1)
    fail(ErrorCode::InvalidArgument, "input too small for the block widths");
}

namespace {

std::shared_ptr<Tensor> gaussian_tensor(Rng& rng, std::vector<int64_t> shape,
                                        Layout layout, double stddev,
                                        bool heavy_tailed) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<float> data(size_t(n));
  for (auto& v : data) {
    double x = rng.normal() * stddev;
    if (heavy_tailed && rng.uniform() < 0.01) x *= 10.0;
    v = float(x);
  }
  return std::make_shared<Tensor>(std::move(shape), std::move(data), layout);
}

std::shared_ptr<Tensor> uniform_tensor(Rng& rng, std::vector<int64_t> shape,
                                       Layout layout, double lo, double hi) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<float> data(size_t(n));
  for (auto& v : data) v = float(rng.uniform_in(lo, hi));
  return std::make_shared<Tensor>(std::move(shape), std::move(data), layout);
}

struct Builder {
  ModelGraph g;
  Rng rng;
  bool heavy_tailed;

  Builder(uint64_t seed, bool heavy)
      : rng(mix_seed(seed, "model")), heavy_tailed(heavy) {}

  std::string conv(const std::string& id, const std::string& input, int in_ch,
                   int out_ch, int k, int stride, int pad) {
    const double stddev = 1.0 / std::sqrt(double(in_ch * k * k));
    g.tensors[id + ".w"] = gaussian_tensor(rng, {out_ch, in_ch, k, k},
                                           Layout::WeightOIHW, stddev,
                                           heavy_tailed);
    g.tensors[id + ".b"] =
        gaussian_tensor(rng, {out_ch}, Layout::Vector, 0.01, false);
    Node n;
    n.id = id;
    n.kind = NodeKind::Conv2D;
    n.inputs = {input};
    n.weight = id + ".w";
    n.bias = id + ".b";
    n.stride = stride;
    n.pad = pad;
    g.nodes.push_back(std::move(n));
    return id;
  }

  std::string batchnorm(const std::string& id, const std::string& input,
                        int ch) {
    g.tensors[id + ".g"] =
        uniform_tensor(rng, {ch}, Layout::Vector, 0.7, 1.3);
    g.tensors[id + ".bt"] =
        gaussian_tensor(rng, {ch}, Layout::Vector, 0.1, false);
    g.tensors[id + ".m"] =
        gaussian_tensor(rng, {ch}, Layout::Vector, 0.2, false);
    g.tensors[id + ".v"] =
        uniform_tensor(rng, {ch}, Layout::Vector, 0.5, 1.5);
    Node n;
    n.id = id;
    n.kind = NodeKind::BatchNorm;
    n.inputs = {input};
    n.bn_gamma = id + ".g";
    n.bn_beta = id + ".bt";
    n.bn_mean = id + ".m";
    n.bn_var = id + ".v";
    n.bn_eps = 1e-5;
    g.nodes.push_back(std::move(n));
    return id;
  }

  std::string simple(const std::string& id, NodeKind kind,
                     std::vector<std::string> inputs) {
    Node n;
    n.id = id;
    n.kind = kind;
    n.inputs = std::move(inputs);
    g.nodes.push_back(std::move(n));
    return id;
  }
};

} // namespace

ModelGraph gen_toy_model(const FixtureSpec& spec) {
  spec.validate();
  Builder b(spec.seed, spec.heavy_tailed);

  Node input;
  input.id = "in";
  input.kind = NodeKind::Input;
  input.input_chw = {spec.in_c, spec.in_h, spec.in_w};
  b.g.nodes.push_back(input);

  // Stem: conv-bn-relu to the first block width.
  std::string cur = b.conv("stem", "in", spec.in_c, spec.widths[0], 3, 1, 1);
  cur = b.batchnorm("stem.bn", cur, spec.widths[0]);
  cur = b.simple("stem.relu", NodeKind::ReLU, {cur});

  int ch = spec.widths[0];
  int h = spec.in_h;
  int w = spec.in_w;
  for (size_t i = 0; i < spec.widths.size(); ++i) {
    const std::string base = "b" + std::to_string(i);
    const int out_ch = spec.widths[i];
    const int stride = out_ch == ch ? 1 : 2;
    const std::string block_in = cur;

    std::string main =
        b.conv(base + ".c1", block_in, ch, out_ch, 3, stride, 1);
    main = b.batchnorm(base + ".bn1", main, out_ch);
    main = b.simple(base + ".relu1", NodeKind::ReLU, {main});
    main = b.conv(base + ".c2", main, out_ch, out_ch, 3, 1, 1);
    main = b.batchnorm(base + ".bn2", main, out_ch);

    std::string skip = block_in;
    if (stride != 1 || out_ch != ch) {
      skip = b.conv(base + ".down", block_in, ch, out_ch, 1, stride, 0);
      skip = b.batchnorm(base + ".bn3", skip, out_ch);
    }

    cur = b.simple(base + ".add", NodeKind::Add, {main, skip});
    cur = b.simple(base + ".relu2", NodeKind::ReLU, {cur});
    ch = out_ch;
    h = (h + 2 - 3) / stride + 1; // 3x3 pad-1 conv output size
    w = (w + 2 - 3) / stride + 1;
  }

  // Global average pool, then the classifier.
  Node gap;
  gap.id = "gap";
  gap.kind = NodeKind::AvgPool;
  gap.inputs = {cur};
  gap.kernel_h = h;
  gap.kernel_w = w;
  gap.stride = 1;
  gap.pad = 0;
  b.g.nodes.push_back(gap);

  const double fc_std = 1.0 / std::sqrt(double(ch));
  b.g.tensors["fc.w"] = gaussian_tensor(b.rng, {spec.classes, ch},
                                        Layout::Matrix, fc_std,
                                        spec.heavy_tailed);
  b.g.tensors["fc.b"] =
      gaussian_tensor(b.rng, {spec.classes}, Layout::Vector, 0.01, false);
  Node fc;
  fc.id = "fc";
  fc.kind = NodeKind::FullyConnected;
  fc.inputs = {"gap"};
  fc.weight = "fc.w";
  fc.bias = "fc.b";
  b.g.nodes.push_back(fc);

  b.simple("out", NodeKind::Output, {"fc"});

  const auto errors = validate_graph(b.g);
  if (!errors.empty())
    fail(ErrorCode::Internal, "generated fixture invalid: " + errors[0]);
  return std::move(b.g);
}

Dataset gen_dataset(const FixtureSpec& spec, const ModelGraph& float_model) {
  spec.validate();

  // Inputs are non-negative like normalized image data; labels come from the
  // float model itself. When the dataset is large enough that every class
  // should statistically appear, absent classes trigger a deterministic
  // regeneration with the next derived seed.
  const bool want_all_classes =
      spec.dataset_size >= 50 * spec.classes;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(mix_seed(spec.seed, "dataset") + uint64_t(attempt));
    std::vector<float> data(size_t(spec.dataset_size) * size_t(spec.in_c) *
                            size_t(spec.in_h) * size_t(spec.in_w));
    for (auto& v : data) v = float(rng.uniform());
    Dataset ds;
    ds.images = Tensor({spec.dataset_size, spec.in_c, spec.in_h, spec.in_w},
                       std::move(data), Layout::ActNCHW);

    const Tensor logits = forward_all(float_model, ds.images, ExecMode::Float);
    ds.labels.resize(size_t(spec.dataset_size));
    std::set<int64_t> seen;
    for (int64_t n = 0; n < spec.dataset_size; ++n) {
      const int64_t cls = argmax_row(logits, n);
      ds.labels[size_t(n)] = uint32_t(cls);
      seen.insert(cls);
    }
    if (!want_all_classes || int(seen.size()) == spec.classes) return ds;
  }
  fail(ErrorCode::Internal,
       "could not cover all classes after 100 dataset regenerations");
}

GoldenPair gen_golden(const FixtureSpec& spec, const ModelGraph& float_model) {
  Rng rng(mix_seed(spec.seed, "golden"));
  std::vector<float> data(size_t(spec.in_c) * size_t(spec.in_h) *
                          size_t(spec.in_w));
  for (auto& v : data) v = float(rng.uniform());
  GoldenPair gp;
  gp.input = Tensor({1, spec.in_c, spec.in_h, spec.in_w}, std::move(data),
                    Layout::ActNCHW);
  gp.logits = forward(float_model, gp.input, ExecMode::Float);
  return gp;
}

void write_fixture_files(const FixtureSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const ModelGraph model = gen_toy_model(spec);
  save_model(model, (fs::path(out_dir) / "model.ptqm").string());

  const Dataset ds = gen_dataset(spec, model);
  save_dataset(ds, (fs::path(out_dir) / "dataset.ptqt").string());

  const GoldenPair gp = gen_golden(spec, model);
  TensorStore golden;
  golden["input"] = std::make_shared<Tensor>(gp.input);
  golden["logits"] = std::make_shared<Tensor>(gp.logits);
  save_tensors(golden, (fs::path(out_dir) / "golden.ptqt").string());
}

} // namespace ptq
