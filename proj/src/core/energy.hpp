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

#include <cstdint>
#include <map>
#include <string>

namespace ptq {

// Per-MAC energy table keyed by (weight, activation) word-length, plus the
// fp32 reference, plus optional per-bit memory-access energies by
// technology. Energy per MAC grows with word-length; validate() enforces
// this monotonicity and positivity.
//
// The shipped defaults pin the fp32/int8 ratio to exactly 27 and scale the
// other entries with the product of operand widths:
//   pj(w, a) = 2.78125 * (w * a) / 64,  fp32 = 27 * pj(8, 8) = 75.09375.
// Both constants are exactly representable, so the 27x ratio is bit-exact.
class EnergyModel {
public:
  static EnergyModel builtin_default();
  static EnergyModel load(const std::string& path);
  void save(const std::string& path) const;

  double fp32_pj_per_mac() const { return fp32_pj_; }
  double pj_per_mac(int wl_w, int wl_a) const; // missing entry -> error
  const std::map<std::string, double>& mem_pj_per_bit() const {
    return mem_pj_;
  }

  void validate() const;

private:
  double fp32_pj_ = 0.0;
  std::map<std::pair<int, int>, double> mac_pj_;
  std::map<std::string, double> mem_pj_;
};

double energy_joules(uint64_t macs, double pj_per_mac);

} // namespace ptq
