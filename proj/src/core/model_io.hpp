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

#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/tensor.hpp"

namespace ptq {

// Model = text manifest (.ptqm) + binary tensor payload (.ptqt sibling).
// The manifest lists nodes in topological order, one record per node, with
// numeric attributes as hex floats so round-trips are lossless. save/load is
// bit-exact for tensors and structure-preserving for the graph.
void save_model(const ModelGraph& g, const std::string& manifest_path);
ModelGraph load_model(const std::string& manifest_path);

struct Dataset {
  Tensor images; // (N, C, H, W)
  std::vector<uint32_t> labels;
};

// Images live in a tensor file under the name "images"; labels in a
// "<path>.labels" sidecar.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path, bool require_labels = true);

} // namespace ptq
