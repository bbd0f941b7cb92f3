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

#include <map>
#include <memory>
#include <string>

#include "core/tensor.hpp"

namespace ptq {

// Named-tensor container, little-endian throughout:
//   magic "PTQTNSR\0" (8 bytes), version u16, count u32,
//   directory: count x { name_len u32, name bytes, offset u64 },
//   entries at offsets: { rank u16, layout u16, shape u32 x rank,
//                         payload f32 x numel }.
// Entries are written in directory order; the map form keeps names sorted so
// emission is byte-deterministic.
using TensorStore = std::map<std::string, std::shared_ptr<const Tensor>>;

void save_tensors(const TensorStore& tensors, const std::string& path);
TensorStore load_tensors(const std::string& path);

// Label sidecar: magic "PTQLBLS\0", version u16, count u32, u32 per sample.
void save_labels(const std::vector<uint32_t>& labels, const std::string& path);
std::vector<uint32_t> load_labels(const std::string& path);

} // namespace ptq
