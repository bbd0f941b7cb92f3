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

#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ptq {

int64_t argmax_row(const Tensor& logits, int64_t row) {
  const int64_t K = logits.dim(1);
  auto data = logits.data().subspan(size_t(row * K), size_t(K));
  int64_t best = 0;
  for (int64_t k = 1; k < K; ++k)
    if (data[size_t(k)] > data[size_t(best)]) best = k;
  return best;
}

double top1_accuracy(const Tensor& logits, std::span<const uint32_t> labels) {
  if (logits.rank() != 2)
    fail(ErrorCode::InvalidArgument, "logits must be (batch, classes)");
  const int64_t N = logits.dim(0);
  if (N == 0 || labels.empty())
    fail(ErrorCode::InvalidArgument, "empty batch");
  if (int64_t(labels.size()) != N)
    fail(ErrorCode::InvalidArgument, "label count does not match batch");
  int64_t correct = 0;
  for (int64_t n = 0; n < N; ++n)
    if (argmax_row(logits, n) == int64_t(labels[size_t(n)])) correct++;
  return double(correct) / double(N);
}

void compute_acc_diff(std::vector<ExperimentRecord>& records) {
  std::map<std::pair<int, int>, std::pair<double, int64_t>> groups;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    auto& [sum, n] = groups[{r.plan.wl_w, r.plan.wl_a}];
    sum += r.top1;
    n++;
  }
  for (auto& r : records) {
    if (r.status != "ok") {
      r.acc_diff = 0.0;
      continue;
    }
    const auto& [sum, n] = groups.at({r.plan.wl_w, r.plan.wl_a});
    r.acc_diff = r.top1 - sum / double(n);
  }
}

uint64_t weight_element_count(const ModelGraph& g) {
  uint64_t total = 0;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Conv2D || n.kind == NodeKind::FullyConnected)
      total += uint64_t(g.tensor(n.weight).numel());
  return total;
}

uint64_t activation_element_count(const ModelGraph& g) {
  auto shapes = infer_shapes(g);
  uint64_t total = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Quant || n.kind == NodeKind::Output) continue;
    uint64_t elems = 1;
    for (int64_t d : shapes.at(n.id)) elems *= uint64_t(d);
    total += elems;
  }
  return total;
}

double memory_footprint_bytes(const ModelGraph& g, int wl_w, int wl_a) {
  const uint64_t bits = weight_element_count(g) * uint64_t(wl_w) +
                        activation_element_count(g) * uint64_t(wl_a);
  return double(bits) / 8.0;
}

uint64_t mac_count(const ModelGraph& g) {
  auto shapes = infer_shapes(g);
  uint64_t total = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Conv2D) {
      const Tensor& w = g.tensor(n.weight);
      const auto& s = shapes.at(n.id); // {O, OH, OW}
      total += uint64_t(s[0] * s[1] * s[2]) *
               uint64_t(w.dim(1) * w.dim(2) * w.dim(3));
    } else if (n.kind == NodeKind::FullyConnected) {
      const Tensor& w = g.tensor(n.weight);
      total += uint64_t(w.dim(0) * w.dim(1));
    }
  }
  return total;
}

std::vector<size_t> pareto_front_indices(std::span<const double> cost,
                                         std::span<const double> accuracy) {
  if (cost.size() != accuracy.size())
    fail(ErrorCode::InvalidArgument, "cost/accuracy length mismatch");
  const size_t n = cost.size();
  if (n == 0) fail(ErrorCode::InvalidArgument, "pareto front of empty set");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (cost[a] != cost[b]) return cost[a] < cost[b];
    if (accuracy[a] != accuracy[b]) return accuracy[a] > accuracy[b];
    return a < b;
  });

  std::vector<size_t> front;
  double best_acc = -std::numeric_limits<double>::infinity();
  double best_cost = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const size_t idx = order[i];
    if (accuracy[idx] > best_acc) {
      best_acc = accuracy[idx];
      best_cost = cost[idx];
      front.push_back(idx);
    } else if (accuracy[idx] == best_acc && cost[idx] == best_cost) {
      front.push_back(idx); // exact duplicate of a front point
    }
  }
  return front;
}

std::optional<double> pearson_correlation(std::span<const double> x,
                                          std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    fail(ErrorCode::InvalidArgument, "correlation needs equal non-empty series");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

} // namespace ptq
