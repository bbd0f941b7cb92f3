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

#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/calibration.hpp"
#include "core/quantize.hpp"
#include "core/tensor.hpp"
#include "core/tensor_io.hpp"

namespace ptq {

enum class NodeKind {
  Input,
  Conv2D,
  BatchNorm,
  ReLU,
  Add,
  MaxPool,
  AvgPool,
  FullyConnected,
  Quant,
  Output,
};

const char* node_kind_name(NodeKind k);
NodeKind parse_node_kind(const std::string& name);

enum class QuantTag { Activation, Residual };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Input;
  std::vector<std::string> inputs;

  // Conv2D / pooling
  int kernel_h = 0, kernel_w = 0;
  int stride = 1;
  int pad = 0;

  // Conv2D / FullyConnected
  std::string weight; // tensor name
  std::string bias;   // tensor name, may be empty

  // BatchNorm
  std::string bn_gamma, bn_beta, bn_mean, bn_var;
  double bn_eps = 1e-5;

  // Input
  std::array<int64_t, 3> input_chw = {0, 0, 0};

  // Quant
  QuantTag qtag = QuantTag::Activation;
  int q_bits = 0;
  ScaleMethod q_method;
  bool q_resolved = false;
  QuantParams q_params;
};

enum class ResidualMode { FpRes, QRes };

const char* residual_mode_name(ResidualMode m);
ResidualMode parse_residual_mode(const std::string& name);

struct QuantPlan {
  int wl_w = 8;
  int wl_a = 8;
  ScaleMethod weight_method;          // WSM: AbsMax | AbsP | LSQ | LSQPlus
  ScaleMethod act_method;             // ASM: AbsMax | AbsP | LSQ | BatchQuant
  AxisGroup weight_group = AxisGroup::per_channel(0);
  ResidualMode residual = ResidualMode::FpRes;

  void validate() const; // method/target compatibility, word-length bounds
};

// Per-activation shape: {C, H, W} after conv-ish nodes, {F} after FC.
using ActShape = std::vector<int64_t>;

class ModelGraph {
public:
  std::vector<Node> nodes; // topological order
  TensorStore tensors;

  bool bn_folded = false;
  bool quantized = false;
  std::optional<QuantPlan> plan;
  std::map<std::string, double> weight_mse; // recorded at quantize time

  const Node* find(const std::string& id) const;
  const Tensor& tensor(const std::string& name) const;
  bool has_quant_nodes() const;

  // Consumers of each node id, in topological order.
  std::map<std::string, std::vector<std::string>> consumers() const;
};

// Structural checks: unique ids, topological input ordering (acyclicity),
// arities, tensor presence, and shape agreement. Returns one message per
// violation, each naming the offending node.
std::vector<std::string> validate_graph(const ModelGraph& g);

// Output shape of every node at batch 1. Throws on invalid graphs.
std::map<std::string, ActShape> infer_shapes(const ModelGraph& g);

// Merges BatchNorm parameters into the preceding Conv2D/FullyConnected
// weights and bias, removing the BN nodes. Errors if a BN does not directly
// follow a foldable layer.
ModelGraph fold_batchnorm(const ModelGraph& g);

// Places activation Quant nodes on the network input and after every ReLU,
// and residual Quant nodes on Add outputs when the plan says QRes. Scales
// stay unresolved until resolve_activation_scales. Errors if the graph
// already holds Quant nodes or still holds BatchNorm nodes.
ModelGraph insert_quant_nodes(const ModelGraph& g, const QuantPlan& plan);

// Fills in every Quant node's QuantParams from profile statistics.
ModelGraph resolve_activation_scales(const ModelGraph& g,
                                     const CalibrationProfile& profile);

// Fake-quantizes every conv/FC weight tensor per the plan and records the
// per-layer quantization MSE. Biases stay full precision.
ModelGraph quantize_weights(const ModelGraph& g);

} // namespace ptq
