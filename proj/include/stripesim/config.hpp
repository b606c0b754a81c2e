// SPDX-License-Identifier: Apache-2.0
//
// stripesim - cell-free MIMO downlink over serial fronthaul
// Copyright (C) 2026 the stripesim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stripesim {

// Compression strategy on the serial fronthaul. Each access point quantizes
// its own precoded block; WZ additionally lets AP i treat the already
// recovered blocks 1..i-1 as decoder side information.
enum class Scheme { WZ, P2P };

inline std::string to_string(Scheme s) {
  return s == Scheme::WZ ? "WZ" : "P2P";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "WZ" || s == "wz") return Scheme::WZ;
  if (s == "P2P" || s == "p2p") return Scheme::P2P;
  throw std::invalid_argument("unknown scheme: " + s);
}

// Static description of one network instance. All powers are linear units
// with the noise floor at noise_power; distances are metres.
//
// The serial fronthaul carries every AP's quantized block over the links
// between the AP and the central processor, so a link budget of
// phase_ratio * fronthaul_capacity symbols-worth of bits is shared by
// num_aps blocks: each block gets per_block_budget_bits().
struct NetworkConfig {
  int num_ues = 4;          // K
  int num_aps = 3;          // L
  int antennas_per_ap = 2;  // N

  double tx_power = 10.0;           // per-AP budget, linear
  double noise_power = 1.0;         // receiver noise variance
  double fronthaul_capacity = 2.0;  // bits/symbol per fronthaul link
  double phase_ratio = 1.0;         // fronthaul symbols per access symbol

  double cell_radius = 200.0;
  double ref_distance = 30.0;
  double ref_pathloss = 1.0;
  double pathloss_exponent = 3.0;

  // Channel estimation error variance as a fraction of the pathloss,
  // beta = fraction * rho. The matrix, when non-empty (K x L), overrides the
  // scalar per (ue, ap) pair.
  double csi_error_fraction = 0.1;
  Eigen::MatrixXd csi_error_fraction_matrix;

  int total_antennas() const { return num_aps * antennas_per_ap; }

  double per_block_budget_bits() const {
    return phase_ratio * fronthaul_capacity / static_cast<double>(num_aps);
  }

  double csi_fraction(int ue, int ap) const {
    if (csi_error_fraction_matrix.size() > 0)
      return csi_error_fraction_matrix(ue, ap);
    return csi_error_fraction;
  }

  void set_snr_db(double snr_db) {
    tx_power = noise_power * std::pow(10.0, snr_db / 10.0);
  }

  double snr_db() const { return 10.0 * std::log10(tx_power / noise_power); }

  void validate() const {
    auto fail = [](const std::string& msg) {
      throw std::invalid_argument("NetworkConfig: " + msg);
    };
    if (num_ues < 1) fail("num_ues must be >= 1");
    if (num_aps < 1) fail("num_aps must be >= 1");
    if (antennas_per_ap < 1) fail("antennas_per_ap must be >= 1");
    if (!(tx_power > 0.0)) fail("tx_power must be positive");
    if (!(noise_power > 0.0)) fail("noise_power must be positive");
    if (!(fronthaul_capacity > 0.0)) fail("fronthaul_capacity must be positive");
    if (!(phase_ratio > 0.0)) fail("phase_ratio must be positive");
    if (!(cell_radius > 0.0)) fail("cell_radius must be positive");
    if (!(ref_distance > 0.0)) fail("ref_distance must be positive");
    if (!(ref_pathloss > 0.0)) fail("ref_pathloss must be positive");
    if (!(pathloss_exponent >= 0.0)) fail("pathloss_exponent must be >= 0");
    if (csi_error_fraction_matrix.size() > 0) {
      if (csi_error_fraction_matrix.rows() != num_ues ||
          csi_error_fraction_matrix.cols() != num_aps)
        fail("csi_error_fraction_matrix must be num_ues x num_aps");
    }
    for (int k = 0; k < num_ues; ++k)
      for (int i = 0; i < num_aps; ++i) {
        const double f = csi_fraction(k, i);
        if (!(f >= 0.0 && f <= 1.0))
          fail("csi error fraction must lie in [0, 1]");
      }
  }
};

}  // namespace stripesim
