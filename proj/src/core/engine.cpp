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

#include "core/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ptq {

namespace {

// Direct convolution, zero padding. Accumulation order is fixed
// (ic, ky, kx ascending, double accumulator) so results are bit-stable and
// batch-size invariant.
Tensor conv2d(const Tensor& in, const Tensor& w, const Tensor* bias,
              int stride, int pad) {
  const int64_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int64_t O = w.dim(0), I = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  if (I != C) fail(ErrorCode::Graph, "conv channel mismatch");
  const int64_t OH = (H + 2 * pad - KH) / stride + 1;
  const int64_t OW = (W + 2 * pad - KW) / stride + 1;

  Tensor out({N, O, OH, OW}, Layout::ActNCHW);
  auto x = in.data();
  auto wd = w.data();
  auto y = out.mutable_data();

  for (int64_t n = 0; n < N; ++n) {
    const float* xn = x.data() + n * C * H * W;
    float* yn = y.data() + n * O * OH * OW;
    for (int64_t oc = 0; oc < O; ++oc) {
      const float* wo = wd.data() + oc * I * KH * KW;
      const double b = bias ? double(bias->data()[size_t(oc)]) : 0.0;
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          double acc = 0.0;
          for (int64_t ic = 0; ic < I; ++ic) {
            const float* xc = xn + ic * H * W;
            const float* wc = wo + ic * KH * KW;
            for (int64_t ky = 0; ky < KH; ++ky) {
              const int64_t iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              for (int64_t kx = 0; kx < KW; ++kx) {
                const int64_t ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= W) continue;
                acc += double(xc[iy * W + ix]) * double(wc[ky * KW + kx]);
              }
            }
          }
          yn[(oc * OH + oy) * OW + ox] = float(acc + b);
        }
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& in) {
  std::vector<float> out(in.data().begin(), in.data().end());
  for (float& v : out) v = v < 0.0f ? 0.0f : v;
  return Tensor(in.shape(), std::move(out), in.layout());
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(ErrorCode::Graph, "add operands must have equal shape");
  std::vector<float> out(size_t(a.numel()));
  auto x = a.data();
  auto y = b.data();
  for (int64_t i = 0; i < a.numel(); ++i)
    out[size_t(i)] = x[size_t(i)] + y[size_t(i)];
  return Tensor(a.shape(), std::move(out), a.layout());
}

Tensor pool2d(const Tensor& in, int kh, int kw, int stride, int pad,
              bool is_max) {
  const int64_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int64_t OH = (H + 2 * pad - kh) / stride + 1;
  const int64_t OW = (W + 2 * pad - kw) / stride + 1;
  if (OH <= 0 || OW <= 0) fail(ErrorCode::Graph, "pool kernel larger than input");

  Tensor out({N, C, OH, OW}, Layout::ActNCHW);
  auto x = in.data();
  auto y = out.mutable_data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const float* xc = x.data() + (n * C + c) * H * W;
      float* yc = y.data() + (n * C + c) * OH * OW;
      for (int64_t oy = 0; oy < OH; ++oy) {
        for (int64_t ox = 0; ox < OW; ++ox) {
          double acc = is_max ? -std::numeric_limits<double>::infinity() : 0.0;
          for (int64_t ky = 0; ky < kh; ++ky) {
            const int64_t iy = oy * stride + ky - pad;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t ix = ox * stride + kx - pad;
              // Out-of-bounds taps contribute zero, matching zero padding.
              const double v = (iy < 0 || iy >= H || ix < 0 || ix >= W)
                                   ? 0.0
                                   : double(xc[iy * W + ix]);
              if (is_max) acc = std::max(acc, v);
              else acc += v;
            }
          }
          yc[oy * OW + ox] = float(is_max ? acc : acc / double(kh * kw));
        }
      }
    }
  }
  return out;
}

Tensor fully_connected(const Tensor& in, const Tensor& w, const Tensor* bias) {
  const int64_t N = in.dim(0);
  int64_t flat = 1;
  for (int64_t a = 1; a < in.rank(); ++a) flat *= in.dim(a);
  const int64_t O = w.dim(0), I = w.dim(1);
  if (I != flat) fail(ErrorCode::Graph, "fc input size mismatch");

  Tensor out({N, O}, Layout::Matrix);
  auto x = in.data();
  auto wd = w.data();
  auto y = out.mutable_data();
  for (int64_t n = 0; n < N; ++n) {
    const float* xn = x.data() + n * flat;
    for (int64_t o = 0; o < O; ++o) {
      const float* wo = wd.data() + o * I;
      double acc = 0.0;
      for (int64_t i = 0; i < I; ++i) acc += double(xn[i]) * double(wo[i]);
      if (bias) acc += double(bias->data()[size_t(o)]);
      y[size_t(n * O + o)] = float(acc);
    }
  }
  return out;
}

} // namespace

Tensor forward(const ModelGraph& g, const Tensor& input, ExecMode mode,
               CalibContext* calib, SiteMseMap* mse) {
  if (input.rank() != 4 || input.layout() != Layout::ActNCHW)
    fail(ErrorCode::InvalidArgument, "engine input must be an NCHW batch");
  if (mode == ExecMode::Calibrate && calib == nullptr)
    fail(ErrorCode::InvalidArgument, "calibrate mode needs a stats sink");
  if (mode == ExecMode::FakeQuant && !g.quantized)
    fail(ErrorCode::State, "fake-quant forward requires quantized weights");

  // Free intermediate activations once their last consumer ran.
  std::map<std::string, int> uses;
  for (const auto& n : g.nodes)
    for (const auto& in : n.inputs) uses[in]++;

  std::map<std::string, Tensor> acts;
  auto take = [&](const std::string& id) -> const Tensor& {
    auto it = acts.find(id);
    if (it == acts.end())
      fail(ErrorCode::Graph, "activation not computed: " + id);
    return it->second;
  };
  auto release = [&](const std::string& id) {
    auto u = uses.find(id);
    if (u != uses.end() && --u->second == 0) acts.erase(id);
  };

  const Node* output = nullptr;
  for (const auto& n : g.nodes) {
    Tensor result;
    switch (n.kind) {
      case NodeKind::Input: {
        if (input.dim(1) != n.input_chw[0] || input.dim(2) != n.input_chw[1] ||
            input.dim(3) != n.input_chw[2])
          fail(ErrorCode::InvalidArgument, "batch shape does not match model input");
        result = input;
        break;
      }
      case NodeKind::Conv2D: {
        const Tensor& x = take(n.inputs[0]);
        const Tensor* b = n.bias.empty() ? nullptr : &g.tensor(n.bias);
        result = conv2d(x, g.tensor(n.weight), b, n.stride, n.pad);
        break;
      }
      case NodeKind::BatchNorm: {
        // Inference-time BN as a per-channel affine.
        const Tensor& x = take(n.inputs[0]);
        const Tensor& gamma = g.tensor(n.bn_gamma);
        const Tensor& beta = g.tensor(n.bn_beta);
        const Tensor& meanT = g.tensor(n.bn_mean);
        const Tensor& varT = g.tensor(n.bn_var);
        const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
        std::vector<float> out(size_t(x.numel()));
        auto xd = x.data();
        for (int64_t b = 0; b < N; ++b)
          for (int64_t c = 0; c < C; ++c) {
            const double inv_std =
                1.0 / std::sqrt(double(varT.data()[size_t(c)]) + n.bn_eps);
            const double scale = double(gamma.data()[size_t(c)]) * inv_std;
            const double shift = double(beta.data()[size_t(c)]) -
                                 double(meanT.data()[size_t(c)]) * scale;
            const float* src = xd.data() + (b * C + c) * HW;
            float* dst = out.data() + (b * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i)
              dst[i] = float(double(src[i]) * scale + shift);
          }
        result = Tensor(x.shape(), std::move(out), x.layout());
        break;
      }
      case NodeKind::ReLU:
        result = relu(take(n.inputs[0]));
        break;
      case NodeKind::Add:
        result = add(take(n.inputs[0]), take(n.inputs[1]));
        break;
      case NodeKind::MaxPool:
      case NodeKind::AvgPool:
        result = pool2d(take(n.inputs[0]), n.kernel_h, n.kernel_w, n.stride,
                        n.pad, n.kind == NodeKind::MaxPool);
        break;
      case NodeKind::FullyConnected: {
        const Tensor& x = take(n.inputs[0]);
        const Tensor* b = n.bias.empty() ? nullptr : &g.tensor(n.bias);
        result = fully_connected(x, g.tensor(n.weight), b);
        break;
      }
      case NodeKind::Quant: {
        const Tensor& x = take(n.inputs[0]);
        switch (mode) {
          case ExecMode::Float:
            result = x;
            break;
          case ExecMode::Calibrate: {
            auto [it, inserted] = calib->stats.try_emplace(
                n.id, AxisGroup::whole(), mix_seed(calib->seed, n.id),
                calib->reservoir_capacity);
            (void)inserted;
            it->second.update(x);
            result = x;
            break;
          }
          case ExecMode::FakeQuant: {
            if (!n.q_resolved)
              fail(ErrorCode::State,
                   "unresolved quantization params at site " + n.id);
            result = fake_quantize_tensor(x, n.q_params);
            if (mse) {
              SiteMse& m = (*mse)[n.id];
              auto a = x.data();
              auto b = result.data();
              for (int64_t i = 0; i < x.numel(); ++i) {
                const double d = double(a[size_t(i)]) - double(b[size_t(i)]);
                m.sum_sq += d * d;
              }
              m.count += x.numel();
            }
            break;
          }
        }
        break;
      }
      case NodeKind::Output:
        result = take(n.inputs[0]);
        output = &n;
        break;
    }
    for (const auto& in : n.inputs) release(in);
    acts[n.id] = std::move(result);
  }

  if (!output) fail(ErrorCode::Graph, "graph has no Output node");
  Tensor logits = std::move(acts.at(output->id));
  if (logits.rank() != 2) {
    // Flatten trailing singleton spatial dims to (N, classes).
    int64_t flat = 1;
    for (int64_t a = 1; a < logits.rank(); ++a) flat *= logits.dim(a);
    std::vector<float> data(logits.data().begin(), logits.data().end());
    logits = Tensor({logits.dim(0), flat}, std::move(data), Layout::Matrix);
  }
  return logits;
}

Tensor forward_all(const ModelGraph& g, const Tensor& images, ExecMode mode,
                   SiteMseMap* mse, int64_t batch_size) {
  const int64_t N = images.dim(0);
  const int64_t per = images.numel() / N;

  std::vector<float> out;
  int64_t classes = -1;
  for (int64_t start = 0; start < N; start += batch_size) {
    const int64_t n = std::min(batch_size, N - start);
    std::vector<float> chunk(
        images.data().begin() + start * per,
        images.data().begin() + (start + n) * per);
    Tensor batch({n, images.dim(1), images.dim(2), images.dim(3)},
                 std::move(chunk), Layout::ActNCHW);
    Tensor logits = forward(g, batch, mode, nullptr, mse);
    if (classes < 0) {
      classes = logits.dim(1);
      out.reserve(size_t(N * classes));
    }
    out.insert(out.end(), logits.data().begin(), logits.data().end());
  }
  return Tensor({N, classes}, std::move(out), Layout::Matrix);
}

Tensor gather_samples(const Tensor& images, const std::vector<int64_t>& indices) {
  const int64_t N = images.dim(0);
  const int64_t per = images.numel() / N;
  std::vector<float> data;
  data.reserve(indices.size() * size_t(per));
  for (int64_t idx : indices) {
    if (idx < 0 || idx >= N)
      fail(ErrorCode::InvalidArgument, "sample index out of range");
    data.insert(data.end(), images.data().begin() + idx * per,
                images.data().begin() + (idx + 1) * per);
  }
  return Tensor({int64_t(indices.size()), images.dim(1), images.dim(2),
                 images.dim(3)},
                std::move(data), Layout::ActNCHW);
}

std::map<std::string, CalibrationStats> run_calibration(
    const ModelGraph& g, const Tensor& images, int64_t sample_size,
    uint64_t seed, uint64_t reservoir_capacity) {
  const int64_t N = images.rank() == 4 ? images.dim(0) : 0;
  if (N == 0) fail(ErrorCode::InvalidArgument, "empty calibration dataset");
  if (sample_size < 1 || sample_size > N)
    fail(ErrorCode::InvalidArgument,
         "calibration sample size must be in [1, dataset size]");

  // Partial Fisher-Yates: first sample_size entries of a seeded shuffle.
  std::vector<int64_t> order(size_t(N));
  for (int64_t i = 0; i < N; ++i) order[size_t(i)] = i;
  Rng rng(mix_seed(seed, "calib.sample"));
  for (int64_t i = 0; i < sample_size; ++i) {
    const int64_t j = i + int64_t(rng.below(uint64_t(N - i)));
    std::swap(order[size_t(i)], order[size_t(j)]);
  }
  order.resize(size_t(sample_size));

  CalibContext ctx;
  ctx.seed = seed;
  ctx.reservoir_capacity = reservoir_capacity;

  const int64_t batch = 64;
  for (int64_t start = 0; start < sample_size; start += batch) {
    const int64_t n = std::min(batch, sample_size - start);
    std::vector<int64_t> chunk(order.begin() + start, order.begin() + start + n);
    Tensor b = gather_samples(images, chunk);
    forward(g, b, ExecMode::Calibrate, &ctx);
  }
  return std::move(ctx.stats);
}

} // namespace ptq
