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

#include "core/energy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace ptq {

EnergyModel EnergyModel::builtin_default() {
  EnergyModel m;
  m.fp32_pj_ = 75.09375;
  const double e88 = 2.78125;
  for (int w = 1; w <= 16; ++w)
    for (int a = 1; a <= 16; ++a)
      m.mac_pj_[{w, a}] = e88 * double(w * a) / 64.0;
  m.mem_pj_ = {
      {"ddr3", 70.0},
      {"lpddr3", 21.0},
      {"ddr4", 15.0},
      {"sram", 0.055},
  };
  m.validate();
  return m;
}

double EnergyModel::pj_per_mac(int wl_w, int wl_a) const {
  auto it = mac_pj_.find({wl_w, wl_a});
  if (it == mac_pj_.end())
    fail(ErrorCode::InvalidArgument,
         "energy model has no entry for word-length pair (" +
             std::to_string(wl_w) + ", " + std::to_string(wl_a) + ")");
  return it->second;
}

void EnergyModel::validate() const {
  if (!(fp32_pj_ > 0.0))
    fail(ErrorCode::InvalidArgument, "fp32 MAC energy must be positive");
  for (const auto& [key, pj] : mac_pj_) {
    if (!(pj > 0.0))
      fail(ErrorCode::InvalidArgument, "MAC energies must be positive");
    // Energy must not drop when a word-length grows.
    auto up_w = mac_pj_.find({key.first + 1, key.second});
    if (up_w != mac_pj_.end() && up_w->second < pj)
      fail(ErrorCode::InvalidArgument,
           "MAC energy must be monotone in weight word-length");
    auto up_a = mac_pj_.find({key.first, key.second + 1});
    if (up_a != mac_pj_.end() && up_a->second < pj)
      fail(ErrorCode::InvalidArgument,
           "MAC energy must be monotone in activation word-length");
  }
  for (const auto& [tech, pj] : mem_pj_)
    if (!(pj > 0.0))
      fail(ErrorCode::InvalidArgument,
           "memory energy must be positive: " + tech);
}

void EnergyModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot open for writing: " + path);
  char buf[48];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "ptqenergy v1\n";
  out << "fp32_pj_per_mac " << num(fp32_pj_) << "\n";
  for (const auto& [key, pj] : mac_pj_)
    out << "mac " << key.first << " " << key.second << " " << num(pj) << "\n";
  for (const auto& [tech, pj] : mem_pj_)
    out << "mem " << tech << " " << num(pj) << "\n";
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed: " + path);
}

EnergyModel EnergyModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ptqenergy v1")
    fail(ErrorCode::Format, "unsupported energy model header in " + path);

  EnergyModel m;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "fp32_pj_per_mac") {
      ls >> m.fp32_pj_;
    } else if (kind == "mac") {
      int w = 0, a = 0;
      double pj = 0.0;
      ls >> w >> a >> pj;
      m.mac_pj_[{w, a}] = pj;
    } else if (kind == "mem") {
      std::string tech;
      double pj = 0.0;
      ls >> tech >> pj;
      m.mem_pj_[tech] = pj;
    } else {
      fail(ErrorCode::Format, "unknown energy model record: " + line);
    }
    if (!ls) fail(ErrorCode::Format, "bad energy model line: " + line);
  }
  m.validate();
  return m;
}

double energy_joules(uint64_t macs, double pj_per_mac) {
  return double(macs) * pj_per_mac * 1e-12;
}

} // namespace ptq
