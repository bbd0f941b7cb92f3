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

#include "core/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ptq {

namespace {

namespace fs = std::filesystem;

std::string hexf(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_num(const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Format, "bad numeric field: " + s);
  }
}

std::string tensor_sibling(const std::string& manifest_path) {
  fs::path p(manifest_path);
  p.replace_extension(".ptqt");
  return p.string();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

} // namespace

void save_model(const ModelGraph& g, const std::string& manifest_path) {
  const std::string tensor_path = tensor_sibling(manifest_path);
  save_tensors(g.tensors, tensor_path);

  std::ofstream out(manifest_path);
  if (!out) fail(ErrorCode::Io, "cannot open for writing: " + manifest_path);
  out << "ptqmodel v1\n";
  out << "tensor_file " << fs::path(tensor_path).filename().string() << "\n";
  if (g.bn_folded) out << "bn_folded 1\n";
  if (g.quantized) out << "quantized 1\n";
  if (g.plan) {
    const QuantPlan& p = *g.plan;
    out << "plan wl_w=" << p.wl_w << " wl_a=" << p.wl_a
        << " wsm=" << scale_method_name(p.weight_method.kind)
        << " asm=" << scale_method_name(p.act_method.kind)
        << " k_w=" << hexf(p.weight_method.k) << " k_a=" << hexf(p.act_method.k)
        << " group="
        << (p.weight_group.mode == AxisGroup::Mode::PerOutputChannel
                ? "channel"
                : "layer")
        << " residual=" << residual_mode_name(p.residual) << "\n";
  }
  for (const auto& [layer, mse] : g.weight_mse)
    out << "wmse " << layer << " " << hexf(mse) << "\n";

  for (const auto& n : g.nodes) {
    out << "node " << n.id << " " << node_kind_name(n.kind);
    if (!n.inputs.empty()) out << " inputs=" << join(n.inputs, ',');
    switch (n.kind) {
      case NodeKind::Input:
        out << " chw=" << n.input_chw[0] << "," << n.input_chw[1] << ","
            << n.input_chw[2];
        break;
      case NodeKind::Conv2D:
        out << " weight=" << n.weight;
        if (!n.bias.empty()) out << " bias=" << n.bias;
        out << " stride=" << n.stride << " pad=" << n.pad;
        break;
      case NodeKind::FullyConnected:
        out << " weight=" << n.weight;
        if (!n.bias.empty()) out << " bias=" << n.bias;
        break;
      case NodeKind::BatchNorm:
        out << " gamma=" << n.bn_gamma << " beta=" << n.bn_beta
            << " mean=" << n.bn_mean << " var=" << n.bn_var
            << " eps=" << hexf(n.bn_eps);
        break;
      case NodeKind::MaxPool:
      case NodeKind::AvgPool:
        out << " kernel=" << n.kernel_h << "," << n.kernel_w
            << " stride=" << n.stride << " pad=" << n.pad;
        break;
      case NodeKind::Quant: {
        out << " tag=" << (n.qtag == QuantTag::Residual ? "res" : "act")
            << " wl=" << n.q_bits
            << " method=" << scale_method_name(n.q_method.kind);
        if (n.q_method.kind == ScaleMethod::Kind::AbsP)
          out << " k=" << hexf(n.q_method.k);
        if (n.q_resolved) {
          std::vector<std::string> scales;
          for (double s : n.q_params.scales) scales.push_back(hexf(s));
          out << " scales=" << join(scales, ',');
        }
        break;
      }
      default: break;
    }
    out << "\n";
  }
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: " + manifest_path);
}

namespace {

std::map<std::string, std::string> attr_map(std::istringstream& in,
                                            const std::string& line) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Format, "expected key=value in manifest line: " + line);
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::string take(std::map<std::string, std::string>& kv,
                 const std::string& key, const std::string& line,
                 bool required = true) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    if (required)
      fail(ErrorCode::Format, "missing '" + key + "' in manifest line: " + line);
    return "";
  }
  std::string v = it->second;
  kv.erase(it);
  return v;
}

} // namespace

ModelGraph load_model(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorCode::Io, "cannot open for reading: " + manifest_path);
  std::string line;
  if (!std::getline(in, line) || line != "ptqmodel v1")
    fail(ErrorCode::Format, "unsupported model manifest header in " +
                                manifest_path);

  ModelGraph g;
  std::string tensor_file;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "tensor_file") {
      ls >> tensor_file;
    } else if (kind == "bn_folded") {
      g.bn_folded = true;
    } else if (kind == "quantized") {
      g.quantized = true;
    } else if (kind == "plan") {
      auto kv = attr_map(ls, line);
      QuantPlan p;
      p.wl_w = int(parse_num(take(kv, "wl_w", line)));
      p.wl_a = int(parse_num(take(kv, "wl_a", line)));
      p.weight_method.kind = parse_scale_method(take(kv, "wsm", line));
      p.act_method.kind = parse_scale_method(take(kv, "asm", line));
      p.weight_method.k = parse_num(take(kv, "k_w", line));
      p.act_method.k = parse_num(take(kv, "k_a", line));
      p.weight_group = take(kv, "group", line) == "channel"
                           ? AxisGroup::per_channel(0)
                           : AxisGroup::whole();
      p.residual = parse_residual_mode(take(kv, "residual", line));
      g.plan = p;
    } else if (kind == "wmse") {
      std::string layer, value;
      ls >> layer >> value;
      g.weight_mse[layer] = parse_num(value);
    } else if (kind == "node") {
      std::string id, kname;
      ls >> id >> kname;
      Node n;
      n.id = id;
      n.kind = parse_node_kind(kname);
      auto kv = attr_map(ls, line);
      const std::string inputs = take(kv, "inputs", line, false);
      if (!inputs.empty()) n.inputs = split(inputs, ',');
      switch (n.kind) {
        case NodeKind::Input: {
          auto chw = split(take(kv, "chw", line), ',');
          if (chw.size() != 3)
            fail(ErrorCode::Format, "input chw must have 3 entries: " + line);
          for (int i = 0; i < 3; ++i)
            n.input_chw[size_t(i)] = int64_t(parse_num(chw[size_t(i)]));
          break;
        }
        case NodeKind::Conv2D:
          n.weight = take(kv, "weight", line);
          n.bias = take(kv, "bias", line, false);
          n.stride = int(parse_num(take(kv, "stride", line)));
          n.pad = int(parse_num(take(kv, "pad", line)));
          break;
        case NodeKind::FullyConnected:
          n.weight = take(kv, "weight", line);
          n.bias = take(kv, "bias", line, false);
          break;
        case NodeKind::BatchNorm:
          n.bn_gamma = take(kv, "gamma", line);
          n.bn_beta = take(kv, "beta", line);
          n.bn_mean = take(kv, "mean", line);
          n.bn_var = take(kv, "var", line);
          n.bn_eps = parse_num(take(kv, "eps", line));
          break;
        case NodeKind::MaxPool:
        case NodeKind::AvgPool: {
          auto kernel = split(take(kv, "kernel", line), ',');
          if (kernel.size() != 2)
            fail(ErrorCode::Format, "pool kernel must be kh,kw: " + line);
          n.kernel_h = int(parse_num(kernel[0]));
          n.kernel_w = int(parse_num(kernel[1]));
          n.stride = int(parse_num(take(kv, "stride", line)));
          n.pad = int(parse_num(take(kv, "pad", line)));
          break;
        }
        case NodeKind::Quant: {
          n.qtag = take(kv, "tag", line) == "res" ? QuantTag::Residual
                                                  : QuantTag::Activation;
          n.q_bits = int(parse_num(take(kv, "wl", line)));
          n.q_method.kind = parse_scale_method(take(kv, "method", line));
          const std::string k = take(kv, "k", line, false);
          if (!k.empty()) n.q_method.k = parse_num(k);
          const std::string scales = take(kv, "scales", line, false);
          if (!scales.empty()) {
            QuantParams p;
            p.range = make_int_range(n.q_bits, /*is_signed=*/false);
            p.group = AxisGroup::whole();
            for (const std::string& s : split(scales, ','))
              p.scales.push_back(parse_num(s));
            n.q_params = std::move(p);
            n.q_resolved = true;
          }
          break;
        }
        default: break;
      }
      if (!kv.empty())
        fail(ErrorCode::Format,
             "unknown attribute '" + kv.begin()->first + "' in line: " + line);
      g.nodes.push_back(std::move(n));
    } else {
      fail(ErrorCode::Format, "unknown manifest record: " + line);
    }
  }

  if (tensor_file.empty())
    fail(ErrorCode::Format, "manifest lists no tensor_file: " + manifest_path);
  const fs::path tpath = fs::path(manifest_path).parent_path() / tensor_file;
  g.tensors = load_tensors(tpath.string());

  const auto errors = validate_graph(g);
  if (!errors.empty()) {
    std::string msg = "invalid model:";
    for (const auto& e : errors) msg += "\n  " + e;
    fail(ErrorCode::Graph, msg);
  }
  return g;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.images.rank() != 4)
    fail(ErrorCode::InvalidArgument, "dataset images must be (N,C,H,W)");
  TensorStore store;
  store["images"] = std::make_shared<Tensor>(ds.images);
  save_tensors(store, path);
  if (!ds.labels.empty()) {
    if (int64_t(ds.labels.size()) != ds.images.dim(0))
      fail(ErrorCode::InvalidArgument, "label count must match sample count");
    save_labels(ds.labels, path + ".labels");
  }
}

Dataset load_dataset(const std::string& path, bool require_labels) {
  TensorStore store = load_tensors(path);
  auto it = store.find("images");
  if (it == store.end())
    fail(ErrorCode::Format, "dataset file holds no 'images' tensor: " + path);
  Dataset ds;
  ds.images = *it->second;
  if (ds.images.rank() != 4)
    fail(ErrorCode::Format, "dataset images must be (N,C,H,W)");

  const std::string label_path = path + ".labels";
  if (fs::exists(label_path)) {
    ds.labels = load_labels(label_path);
    if (int64_t(ds.labels.size()) != ds.images.dim(0))
      fail(ErrorCode::Format, "label count does not match sample count");
  } else if (require_labels) {
    fail(ErrorCode::Io, "missing label sidecar: " + label_path);
  }
  return ds;
}

} // namespace ptq
