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

#include "core/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ptq {

const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "Input";
    case NodeKind::Conv2D: return "Conv2D";
    case NodeKind::BatchNorm: return "BatchNorm";
    case NodeKind::ReLU: return "ReLU";
    case NodeKind::Add: return "Add";
    case NodeKind::MaxPool: return "MaxPool";
    case NodeKind::AvgPool: return "AvgPool";
    case NodeKind::FullyConnected: return "FullyConnected";
    case NodeKind::Quant: return "Quant";
    case NodeKind::Output: return "Output";
  }
  return "?";
}

NodeKind parse_node_kind(const std::string& name) {
  static const std::map<std::string, NodeKind> kinds = {
      {"Input", NodeKind::Input},
      {"Conv2D", NodeKind::Conv2D},
      {"BatchNorm", NodeKind::BatchNorm},
      {"ReLU", NodeKind::ReLU},
      {"Add", NodeKind::Add},
      {"MaxPool", NodeKind::MaxPool},
      {"AvgPool", NodeKind::AvgPool},
      {"FullyConnected", NodeKind::FullyConnected},
      {"Quant", NodeKind::Quant},
      {"Output", NodeKind::Output},
  };
  auto it = kinds.find(name);
  if (it == kinds.end())
    fail(ErrorCode::Format, "unknown node kind: " + name);
  return it->second;
}

const char* residual_mode_name(ResidualMode m) {
  return m == ResidualMode::FpRes ? "fpres" : "qres";
}

ResidualMode parse_residual_mode(const std::string& name) {
  if (name == "fpres") return ResidualMode::FpRes;
  if (name == "qres") return ResidualMode::QRes;
  fail(ErrorCode::InvalidArgument, "unknown residual mode: " + name);
}

void QuantPlan::validate() const {
  if (wl_w < 1 || wl_w > 16 || wl_a < 1 || wl_a > 16)
    fail(ErrorCode::InvalidArgument, "plan word-lengths must be in [1, 16]");
  if (weight_method.kind == ScaleMethod::Kind::BatchQuant)
    fail(ErrorCode::Incompatible, "BatchQuant is activation-only");
  if (act_method.kind == ScaleMethod::Kind::LSQPlus)
    fail(ErrorCode::Incompatible, "LSQ+ is weight-only");
  for (const ScaleMethod& m : {weight_method, act_method})
    if (m.kind == ScaleMethod::Kind::AbsP && !(m.k >= 0.0 && m.k <= 100.0))
      fail(ErrorCode::InvalidArgument, "percentile k must be in [0, 100]");
}

const Node* ModelGraph::find(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const Tensor& ModelGraph::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    fail(ErrorCode::Graph, "tensor not found in store: " + name);
  return *it->second;
}

bool ModelGraph::has_quant_nodes() const {
  return std::any_of(nodes.begin(), nodes.end(),
                     [](const Node& n) { return n.kind == NodeKind::Quant; });
}

std::map<std::string, std::vector<std::string>> ModelGraph::consumers() const {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& n : nodes)
    for (const auto& in : n.inputs) out[in].push_back(n.id);
  return out;
}

namespace {

int expected_input_count(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return 0;
    case NodeKind::Add: return 2;
    default: return 1;
  }
}

bool has_tensor(const ModelGraph& g, const std::string& name) {
  return g.tensors.count(name) != 0;
}

} // namespace

std::vector<std::string> validate_graph(const ModelGraph& g) {
  std::vector<std::string> errors;
  auto err = [&](const std::string& id, const std::string& msg) {
    errors.push_back(id + ": " + msg);
  };

  std::set<std::string> seen;
  int n_inputs = 0, n_outputs = 0;
  for (const auto& n : g.nodes) {
    if (!seen.insert(n.id).second) err(n.id, "duplicate node id");
    if (n.kind == NodeKind::Input) n_inputs++;
    if (n.kind == NodeKind::Output) n_outputs++;

    const int want = expected_input_count(n.kind);
    if (int(n.inputs.size()) != want)
      err(n.id, "expects " + std::to_string(want) + " inputs, has " +
                    std::to_string(n.inputs.size()));

    // Nodes may only consume earlier nodes; this pins both the reference
    // validity and acyclicity of the listed order.
    for (const auto& in : n.inputs)
      if (!seen.count(in)) err(n.id, "input '" + in + "' not defined earlier");

    switch (n.kind) {
      case NodeKind::Input:
        if (n.input_chw[0] <= 0 || n.input_chw[1] <= 0 || n.input_chw[2] <= 0)
          err(n.id, "input shape must be positive");
        break;
      case NodeKind::Conv2D:
      case NodeKind::FullyConnected:
        if (n.weight.empty() || !has_tensor(g, n.weight))
          err(n.id, "weight tensor missing: '" + n.weight + "'");
        if (!n.bias.empty() && !has_tensor(g, n.bias))
          err(n.id, "bias tensor missing: '" + n.bias + "'");
        break;
      case NodeKind::BatchNorm:
        for (const std::string& t : {n.bn_gamma, n.bn_beta, n.bn_mean, n.bn_var})
          if (t.empty() || !has_tensor(g, t))
            err(n.id, "batch-norm tensor missing: '" + t + "'");
        break;
      case NodeKind::MaxPool:
      case NodeKind::AvgPool:
        if (n.kernel_h <= 0 || n.kernel_w <= 0 || n.stride <= 0)
          err(n.id, "pool kernel and stride must be positive");
        break;
      case NodeKind::Quant:
        if (n.q_bits < 1 || n.q_bits > 16)
          err(n.id, "quant word-length out of range");
        break;
      default: break;
    }
  }
  if (n_inputs != 1)
    errors.push_back("graph: expected exactly one Input node, found " +
                     std::to_string(n_inputs));
  if (n_outputs != 1)
    errors.push_back("graph: expected exactly one Output node, found " +
                     std::to_string(n_outputs));

  if (errors.empty()) {
    try {
      infer_shapes(g);
    } catch (const Error& e) {
      errors.push_back(e.what());
    }
  }
  return errors;
}

std::map<std::string, ActShape> infer_shapes(const ModelGraph& g) {
  std::map<std::string, ActShape> shapes;

  auto in_shape = [&](const Node& n, size_t i = 0) -> const ActShape& {
    auto it = shapes.find(n.inputs[i]);
    if (it == shapes.end())
      fail(ErrorCode::Graph, n.id + ": input '" + n.inputs[i] +
                                 "' not defined earlier");
    return it->second;
  };

  for (const auto& n : g.nodes) {
    switch (n.kind) {
      case NodeKind::Input:
        shapes[n.id] = {n.input_chw[0], n.input_chw[1], n.input_chw[2]};
        break;
      case NodeKind::Conv2D: {
        const ActShape& s = in_shape(n);
        if (s.size() != 3) fail(ErrorCode::Graph, n.id + ": conv needs CHW input");
        const Tensor& w = g.tensor(n.weight);
        if (w.rank() != 4 || w.layout() != Layout::WeightOIHW)
          fail(ErrorCode::Graph, n.id + ": conv weight must be rank-4 OIHW");
        const int64_t O = w.dim(0), I = w.dim(1), kh = w.dim(2), kw = w.dim(3);
        if (I != s[0])
          fail(ErrorCode::Graph,
               n.id + ": channel mismatch, input C=" + std::to_string(s[0]) +
                   " vs weight I=" + std::to_string(I));
        if (!n.bias.empty() && g.tensor(n.bias).numel() != O)
          fail(ErrorCode::Graph, n.id + ": bias size must equal out channels");
        const int64_t oh = (s[1] + 2 * n.pad - kh) / n.stride + 1;
        const int64_t ow = (s[2] + 2 * n.pad - kw) / n.stride + 1;
        if (oh <= 0 || ow <= 0)
          fail(ErrorCode::Graph, n.id + ": kernel larger than padded input");
        shapes[n.id] = {O, oh, ow};
        break;
      }
      case NodeKind::BatchNorm: {
        const ActShape& s = in_shape(n);
        if (s.size() != 3) fail(ErrorCode::Graph, n.id + ": BN needs CHW input");
        for (const std::string& t : {n.bn_gamma, n.bn_beta, n.bn_mean, n.bn_var})
          if (g.tensor(t).numel() != s[0])
            fail(ErrorCode::Graph, n.id + ": BN parameter size must equal C");
        shapes[n.id] = s;
        break;
      }
      case NodeKind::ReLU:
      case NodeKind::Quant:
      case NodeKind::Output:
        shapes[n.id] = in_shape(n);
        break;
      case NodeKind::Add: {
        const ActShape& a = in_shape(n, 0);
        const ActShape& b = in_shape(n, 1);
        if (a != b)
          fail(ErrorCode::Graph, n.id + ": add operands must have equal shape");
        shapes[n.id] = a;
        break;
      }
      case NodeKind::MaxPool:
      case NodeKind::AvgPool: {
        const ActShape& s = in_shape(n);
        if (s.size() != 3) fail(ErrorCode::Graph, n.id + ": pool needs CHW input");
        const int64_t oh = (s[1] + 2 * n.pad - n.kernel_h) / n.stride + 1;
        const int64_t ow = (s[2] + 2 * n.pad - n.kernel_w) / n.stride + 1;
        if (oh <= 0 || ow <= 0)
          fail(ErrorCode::Graph, n.id + ": pool kernel larger than input");
        shapes[n.id] = {s[0], oh, ow};
        break;
      }
      case NodeKind::FullyConnected: {
        const ActShape& s = in_shape(n);
        int64_t flat = 1;
        for (int64_t d : s) flat *= d;
        const Tensor& w = g.tensor(n.weight);
        if (w.rank() != 2 || w.layout() != Layout::Matrix)
          fail(ErrorCode::Graph, n.id + ": FC weight must be rank-2 (out, in)");
        if (w.dim(1) != flat)
          fail(ErrorCode::Graph,
               n.id + ": FC input size mismatch, flat=" + std::to_string(flat) +
                   " vs weight in=" + std::to_string(w.dim(1)));
        if (!n.bias.empty() && g.tensor(n.bias).numel() != w.dim(0))
          fail(ErrorCode::Graph, n.id + ": bias size must equal out units");
        shapes[n.id] = {w.dim(0)};
        break;
      }
    }
  }
  return shapes;
}

ModelGraph fold_batchnorm(const ModelGraph& g) {
  // Check preconditions first so a failing fold leaves the input unchanged.
  auto cons = g.consumers();
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::BatchNorm) continue;
    const Node* p = g.find(n.inputs[0]);
    if (!p || (p->kind != NodeKind::Conv2D && p->kind != NodeKind::FullyConnected))
      fail(ErrorCode::Graph,
           n.id + ": batch norm must directly follow Conv2D or FullyConnected");
    if (cons[p->id].size() != 1)
      fail(ErrorCode::Graph,
           n.id + ": cannot fold, producer '" + p->id + "' has other consumers");
  }

  ModelGraph out = g;
  out.nodes.clear();
  std::map<std::string, std::string> rename; // BN id -> producer id

  auto emitted = [&out](const std::string& id) -> Node& {
    for (auto it = out.nodes.rbegin(); it != out.nodes.rend(); ++it)
      if (it->id == id) return *it;
    fail(ErrorCode::Internal, "producer not emitted yet: " + id);
  };

  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::BatchNorm) {
      Node& p = emitted(n.inputs[0]);
      const Tensor& gamma = g.tensor(n.bn_gamma);
      const Tensor& beta = g.tensor(n.bn_beta);
      const Tensor& mean = g.tensor(n.bn_mean);
      const Tensor& var = g.tensor(n.bn_var);
      const Tensor& w = g.tensor(p.weight);

      const int64_t out_ch = w.dim(0);
      const int64_t per_ch = w.numel() / out_ch;
      std::vector<float> wf(w.data().begin(), w.data().end());
      std::vector<float> bf(size_t(out_ch), 0.0f);
      if (!p.bias.empty()) {
        auto b = g.tensor(p.bias).data();
        bf.assign(b.begin(), b.end());
      }
      for (int64_t c = 0; c < out_ch; ++c) {
        const double inv_std =
            1.0 / std::sqrt(double(var.data()[size_t(c)]) + n.bn_eps);
        const double scale = double(gamma.data()[size_t(c)]) * inv_std;
        for (int64_t i = 0; i < per_ch; ++i) {
          const size_t idx = size_t(c * per_ch + i);
          wf[idx] = float(double(wf[idx]) * scale);
        }
        bf[size_t(c)] =
            float((double(bf[size_t(c)]) - double(mean.data()[size_t(c)])) *
                      scale +
                  double(beta.data()[size_t(c)]));
      }
      out.tensors[p.weight] =
          std::make_shared<Tensor>(w.shape(), std::move(wf), w.layout());
      if (p.bias.empty()) p.bias = p.id + ".bias";
      out.tensors[p.bias] = std::make_shared<Tensor>(
          std::vector<int64_t>{out_ch}, std::move(bf), Layout::Vector);
      out.tensors.erase(n.bn_gamma);
      out.tensors.erase(n.bn_beta);
      out.tensors.erase(n.bn_mean);
      out.tensors.erase(n.bn_var);
      rename[n.id] = p.id;
      continue;
    }
    Node copy = n;
    for (auto& in : copy.inputs) {
      auto it = rename.find(in);
      if (it != rename.end()) in = it->second;
    }
    out.nodes.push_back(std::move(copy));
  }
  out.bn_folded = true;
  return out;
}

ModelGraph insert_quant_nodes(const ModelGraph& g, const QuantPlan& plan) {
  plan.validate();
  if (g.has_quant_nodes())
    fail(ErrorCode::State, "graph already holds quantization nodes");
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::BatchNorm)
      fail(ErrorCode::State, "fold batch norm before inserting quant nodes");

  ModelGraph out = g;
  out.nodes.clear();
  std::map<std::string, std::string> rename; // producer id -> quant id

  auto quant_after = [&](std::string producer_id, QuantTag tag) {
    Node q;
    q.id = "q." + producer_id;
    q.kind = NodeKind::Quant;
    q.inputs = {producer_id};
    q.qtag = tag;
    q.q_bits = plan.wl_a;
    q.q_method = plan.act_method;
    rename[producer_id] = q.id;
    out.nodes.push_back(std::move(q));
  };

  for (const auto& n : g.nodes) {
    Node copy = n;
    for (auto& in : copy.inputs) {
      auto it = rename.find(in);
      if (it != rename.end()) in = it->second;
    }
    out.nodes.push_back(std::move(copy));
    if (n.kind == NodeKind::Input || n.kind == NodeKind::ReLU)
      quant_after(n.id, QuantTag::Activation);
    else if (n.kind == NodeKind::Add && plan.residual == ResidualMode::QRes)
      quant_after(n.id, QuantTag::Residual);
  }
  out.plan = plan;
  return out;
}

ModelGraph resolve_activation_scales(const ModelGraph& g,
                                     const CalibrationProfile& profile) {
  ModelGraph out = g;
  for (auto& n : out.nodes) {
    if (n.kind != NodeKind::Quant) continue;
    const SiteProfile* site = profile.find(n.id);
    if (!site)
      fail(ErrorCode::Incompatible,
           "calibration profile holds no site '" + n.id + "'");
    const IntRange r = make_int_range(n.q_bits, /*is_signed=*/false);
    QuantParams p;
    p.range = r;
    p.group = AxisGroup::whole();
    p.scales = {site->scale_for(n.q_method, r)};
    n.q_params = std::move(p);
    n.q_resolved = true;
  }
  return out;
}

ModelGraph quantize_weights(const ModelGraph& g) {
  if (!g.plan) fail(ErrorCode::State, "graph carries no quantization plan");
  if (g.quantized) fail(ErrorCode::State, "weights already quantized");
  const QuantPlan& plan = *g.plan;

  ModelGraph out = g;
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::Conv2D && n.kind != NodeKind::FullyConnected)
      continue;
    const Tensor& w = g.tensor(n.weight);
    const AxisGroup group =
        plan.weight_group.mode == AxisGroup::Mode::PerOutputChannel
            ? AxisGroup::per_channel_of(w)
            : AxisGroup::whole();
    const QuantParams p =
        compute_weight_quant_params(w, plan.weight_method, group, plan.wl_w);
    Tensor fq = fake_quantize_tensor(w, p);
    out.weight_mse[n.id] = quant_mse(w, fq);
    out.tensors[n.weight] = std::make_shared<Tensor>(std::move(fq));
  }
  out.quantized = true;
  return out;
}

} // namespace ptq
