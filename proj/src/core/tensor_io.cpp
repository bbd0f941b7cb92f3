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

#include "core/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace ptq {

namespace {

constexpr char kTensorMagic[8] = {'P', 'T', 'Q', 'T', 'N', 'S', 'R', '\0'};
constexpr char kLabelMagic[8] = {'P', 'T', 'Q', 'L', 'B', 'L', 'S', '\0'};
constexpr uint16_t kVersion = 1;

class Writer {
public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) fail(ErrorCode::Io, "cannot open for writing: " + path);
    path_ = path;
  }

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), std::streamsize(n));
  }
  void u16(uint16_t v) { le(v); }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    le(bits);
  }

  uint64_t tell() { return uint64_t(out_.tellp()); }
  void seek(uint64_t pos) { out_.seekp(std::streamoff(pos)); }

  void done() {
    out_.flush();
    if (!out_) fail(ErrorCode::Io, "write failed: " + path_);
  }

private:
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i)
      buf[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    bytes(buf, sizeof(T));
  }

  std::ofstream out_;
  std::string path_;
};

class Reader {
public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) fail(ErrorCode::Io, "cannot open for reading: " + path);
    path_ = path;
  }

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), std::streamsize(n));
    if (in_.gcount() != std::streamsize(n))
      fail(ErrorCode::Format, "truncated file: " + path_);
  }
  uint16_t u16() { return le<uint16_t>(); }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  float f32() {
    uint32_t bits = le<uint32_t>();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void seek(uint64_t pos) { in_.seekg(std::streamoff(pos)); }

private:
  template <typename T>
  T le() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= T(buf[i]) << (8 * i);
    return v;
  }

  std::ifstream in_;
  std::string path_;
};

} // namespace

void save_tensors(const TensorStore& tensors, const std::string& path) {
  Writer w(path);
  w.bytes(kTensorMagic, 8);
  w.u16(kVersion);
  w.u32(uint32_t(tensors.size()));

  // Directory with placeholder offsets, patched after entries are written.
  std::vector<uint64_t> patch_pos;
  for (const auto& [name, t] : tensors) {
    (void)t;
    w.u32(uint32_t(name.size()));
    w.bytes(name.data(), name.size());
    patch_pos.push_back(w.tell());
    w.u64(0);
  }

  std::vector<uint64_t> offsets;
  for (const auto& [name, t] : tensors) {
    (void)name;
    offsets.push_back(w.tell());
    w.u16(uint16_t(t->rank()));
    w.u16(uint16_t(t->layout()));
    for (int64_t d : t->shape()) w.u32(uint32_t(d));
    for (float v : t->data()) w.f32(v);
  }

  for (size_t i = 0; i < patch_pos.size(); ++i) {
    w.seek(patch_pos[i]);
    w.u64(offsets[i]);
  }
  w.done();
}

TensorStore load_tensors(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kTensorMagic, 8) != 0)
    fail(ErrorCode::Format, "bad magic, not a tensor file: " + path);
  const uint16_t version = r.u16();
  if (version != kVersion)
    fail(ErrorCode::Format, "unsupported tensor file version " +
                                std::to_string(version));
  const uint32_t count = r.u32();

  std::vector<std::pair<std::string, uint64_t>> dir;
  dir.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t len = r.u32();
    if (len > (1u << 20)) fail(ErrorCode::Format, "unreasonable name length");
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    dir.emplace_back(std::move(name), r.u64());
  }

  TensorStore out;
  for (const auto& [name, offset] : dir) {
    r.seek(offset);
    const uint16_t rank = r.u16();
    const uint16_t layout = r.u16();
    if (layout > uint16_t(Layout::Matrix))
      fail(ErrorCode::Format, "unknown layout tag in tensor " + name);
    std::vector<int64_t> shape(rank);
    int64_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      numel *= d;
    }
    std::vector<float> data(size_t(numel));
    for (auto& v : data) v = r.f32();
    auto [it, inserted] = out.emplace(
        name, std::make_shared<Tensor>(std::move(shape), std::move(data),
                                       Layout(layout)));
    (void)it;
    if (!inserted) fail(ErrorCode::Format, "duplicate tensor name: " + name);
  }
  return out;
}

void save_labels(const std::vector<uint32_t>& labels, const std::string& path) {
  Writer w(path);
  w.bytes(kLabelMagic, 8);
  w.u16(kVersion);
  w.u32(uint32_t(labels.size()));
  for (uint32_t v : labels) w.u32(v);
  w.done();
}

std::vector<uint32_t> load_labels(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kLabelMagic, 8) != 0)
    fail(ErrorCode::Format, "bad magic, not a label file: " + path);
  if (r.u16() != kVersion) fail(ErrorCode::Format, "unsupported label file version");
  const uint32_t count = r.u32();
  std::vector<uint32_t> out(count);
  for (auto& v : out) v = r.u32();
  return out;
}

} // namespace ptq
