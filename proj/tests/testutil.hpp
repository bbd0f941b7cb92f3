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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace ptq::testutil {

inline Tensor random_tensor(Rng& rng, std::vector<int64_t> shape,
                            Layout layout, double lo = -1.0, double hi = 1.0) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<float> data(size_t(n));
  for (auto& v : data) v = float(rng.uniform_in(lo, hi));
  return Tensor(std::move(shape), std::move(data), layout);
}

inline Tensor gaussian_tensor(Rng& rng, std::vector<int64_t> shape,
                              Layout layout, double stddev = 1.0) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<float> data(size_t(n));
  for (auto& v : data) v = float(rng.normal() * stddev);
  return Tensor(std::move(shape), std::move(data), layout);
}

// Unique per-process scratch directory, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    namespace fs = std::filesystem;
    path_ = (fs::temp_directory_path() /
             ("ptq_test_" + tag + "_" + std::to_string(::getpid())))
                .string();
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  std::string file(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

inline std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

inline bool same_bytes(const std::string& a, const std::string& b) {
  return read_bytes(a) == read_bytes(b);
}

} // namespace ptq::testutil
