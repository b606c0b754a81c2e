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
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

#include "stripesim/config.hpp"
#include "stripesim/rng.hpp"

namespace stripesim {

// Access points sit on the boundary circle at equal angular spacing; user
// positions are drawn uniformly over the disk. Distances are clamped to
// 1 m so the path-loss model cannot blow up when a UE lands on an AP.
struct Topology {
  Eigen::Matrix2Xd ap_positions;  // 2 x L
  Eigen::Matrix2Xd ue_positions;  // 2 x K
  Eigen::MatrixXd distances;      // K x L, metres
  Eigen::MatrixXd pathlosses;     // K x L, linear
};

inline double pathloss(double distance, const NetworkConfig& cfg) {
  return cfg.ref_pathloss *
         std::pow(distance / cfg.ref_distance, -cfg.pathloss_exponent);
}

inline Topology generate_topology(const NetworkConfig& cfg,
                                  std::uint64_t seed) {
  cfg.validate();
  const int K = cfg.num_ues;
  const int L = cfg.num_aps;
  constexpr double kTwoPi = 6.28318530717958647692;

  Topology topo;
  topo.ap_positions.resize(2, L);
  for (int i = 0; i < L; ++i) {
    const double ang = kTwoPi * i / L;
    topo.ap_positions.col(i) << cfg.cell_radius * std::cos(ang),
        cfg.cell_radius * std::sin(ang);
  }

  Rng rng(seed);
  topo.ue_positions.resize(2, K);
  for (int k = 0; k < K; ++k) {
    // sqrt of a uniform radius fraction gives a uniform density on the disk
    const double r = cfg.cell_radius * std::sqrt(rng.uniform());
    const double ang = kTwoPi * rng.uniform();
    topo.ue_positions.col(k) << r * std::cos(ang), r * std::sin(ang);
  }

  topo.distances.resize(K, L);
  topo.pathlosses.resize(K, L);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < L; ++i) {
      const double d = std::max(
          1.0, (topo.ue_positions.col(k) - topo.ap_positions.col(i)).norm());
      topo.distances(k, i) = d;
      topo.pathlosses(k, i) = pathloss(d, cfg);
    }
  return topo;
}

// One fading draw under the additive channel-estimate model
//   h_{k,i} = hhat_{k,i} + e_{k,i},
// with hhat ~ CN(0, (rho - beta) I) and e ~ CN(0, beta I) independent, so
// the decomposition holds exactly and h keeps the CN(0, rho I) marginal.
struct CsiRealization {
  int num_ues = 0;
  int num_aps = 0;
  int antennas_per_ap = 0;
  Eigen::MatrixXcd true_channels;     // (N*L) x K, column k = h_k
  Eigen::MatrixXcd nominal_channels;  // (N*L) x K, column k = hhat_k
  Eigen::MatrixXd error_variances;    // K x L, beta_{k,i}

  int total_antennas() const { return num_aps * antennas_per_ap; }

  // E_k = blkdiag(beta_{k,1} I_N, ..., beta_{k,L} I_N), materialized only
  // where a dense matrix is genuinely needed (tests, oracles).
  Eigen::MatrixXcd error_covariance(int k) const {
    const int NL = total_antennas();
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(NL, NL);
    for (int i = 0; i < num_aps; ++i)
      E.block(i * antennas_per_ap, i * antennas_per_ap, antennas_per_ap,
              antennas_per_ap) =
          error_variances(k, i) *
          Eigen::MatrixXcd::Identity(antennas_per_ap, antennas_per_ap);
    return E;
  }

  // v^H E_k v without materializing E_k.
  double error_quadratic(int k, const Eigen::VectorXcd& v) const {
    double acc = 0.0;
    for (int i = 0; i < num_aps; ++i)
      acc += error_variances(k, i) *
             v.segment(i * antennas_per_ap, antennas_per_ap).squaredNorm();
    return acc;
  }
};

inline CsiRealization sample_csi(const Topology& topo,
                                 const NetworkConfig& cfg,
                                 std::uint64_t seed) {
  const int K = cfg.num_ues;
  const int L = cfg.num_aps;
  const int N = cfg.antennas_per_ap;
  if (topo.pathlosses.rows() != K || topo.pathlosses.cols() != L)
    throw std::invalid_argument("sample_csi: topology does not match config");

  CsiRealization csi;
  csi.num_ues = K;
  csi.num_aps = L;
  csi.antennas_per_ap = N;
  csi.true_channels.resize(N * L, K);
  csi.nominal_channels.resize(N * L, K);
  csi.error_variances.resize(K, L);

  Rng rng(seed);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < L; ++i) {
      const double rho = topo.pathlosses(k, i);
      const double beta = cfg.csi_fraction(k, i) * rho;
      if (beta > rho)
        throw std::invalid_argument(
            "sample_csi: error variance exceeds channel power");
      csi.error_variances(k, i) = beta;
      for (int n = 0; n < N; ++n) {
        const std::complex<double> hhat = rng.complex_gaussian(rho - beta);
        const std::complex<double> err = rng.complex_gaussian(beta);
        csi.nominal_channels(i * N + n, k) = hhat;
        csi.true_channels(i * N + n, k) = hhat + err;
      }
    }
  return csi;
}

}  // namespace stripesim
