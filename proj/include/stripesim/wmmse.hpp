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

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "stripesim/channel.hpp"
#include "stripesim/config.hpp"
#include "stripesim/linalg.hpp"
#include "stripesim/metrics.hpp"

namespace stripesim {

// Auxiliary variables of the block-coordinate outer loop. With these held
// fixed, both the weighted-MSE rate surrogate and the linearized fronthaul
// constraints are jointly convex in (v, Omega); refreshing them at the
// current iterate makes every surrogate tight there.
struct AuxiliaryState {
  Scheme scheme = Scheme::WZ;
  Eigen::VectorXcd receivers;  // u_k, scalar per UE
  Eigen::VectorXd weights;     // w_k > 0
  // Exactly one family is populated, selected by `scheme`.
  std::vector<Eigen::MatrixXcd> wz_mats;   // Theta_i, size (i+1)*N
  std::vector<Eigen::MatrixXcd> p2p_mats;  // Sigma_i, size N
};

// Scalar MSE of UE k's symbol estimate under receive coefficient u:
// |1 - conj(u) hhat_k^H v_k|^2 + |u|^2 IN_k.
inline double mse(int k, const PrecoderSet& v, const QuantizerSet& omega,
                  std::complex<double> u, const CsiRealization& csi,
                  const NetworkConfig& cfg) {
  const std::complex<double> gain = csi.nominal_channels.col(k).dot(v.V.col(k));
  return std::norm(1.0 - std::conj(u) * gain) +
         std::norm(u) * interference_noise(k, v, omega, csi, cfg);
}

// MMSE receive coefficient u_k = hhat_k^H v_k / (|hhat_k^H v_k|^2 + IN_k).
// A dead UE (zero gain) gets u = 0; the formula is already 0 there but the
// branch documents the intent.
inline std::complex<double> update_receiver(int k, const PrecoderSet& v,
                                            const QuantizerSet& omega,
                                            const CsiRealization& csi,
                                            const NetworkConfig& cfg) {
  const std::complex<double> gain = csi.nominal_channels.col(k).dot(v.V.col(k));
  if (gain == std::complex<double>(0.0, 0.0)) return {0.0, 0.0};
  return gain / (std::norm(gain) + interference_noise(k, v, omega, csi, cfg));
}

// w_k = 1 / e_k; equals 1 + SINR_k when u_k is the MMSE coefficient.
inline double update_weight(int k, const PrecoderSet& v,
                            const QuantizerSet& omega, std::complex<double> u,
                            const CsiRealization& csi,
                            const NetworkConfig& cfg) {
  const double e = mse(k, v, omega, u, csi, cfg);
  if (!(e > 0.0)) throw std::domain_error("update_weight: nonpositive MSE");
  return 1.0 / e;
}

// Linearization point for the cumulative (WZ) fronthaul constraint of
// prefix i: Theta_i = prefix covariance of blocks 0..i. Plugging it into
// ln det Theta + tr(Theta^{-1} X) - dim reproduces ln det X exactly at
// X = Theta, which is what makes the surrogate tight.
inline Eigen::MatrixXcd update_theta(int i, const PrecoderSet& v,
                                     const QuantizerSet& omega) {
  return detail::prefix_covariance(v, omega, i + 1);
}

// P2P counterpart, per-block: Sigma_i = Omega_i + B_ii.
inline Eigen::MatrixXcd update_sigma(int i, const PrecoderSet& v,
                                     const QuantizerSet& omega) {
  const int N = v.antennas_per_ap;
  const auto rows = v.V.middleRows(i * N, N);
  return Eigen::MatrixXcd(rows * rows.adjoint()) + omega.omegas[i];
}

// Refresh every auxiliary at the given iterate (receivers first, then the
// weights that depend on them, then the fronthaul linearization points).
inline AuxiliaryState update_auxiliaries(Scheme scheme, const PrecoderSet& v,
                                         const QuantizerSet& omega,
                                         const CsiRealization& csi,
                                         const NetworkConfig& cfg) {
  const int K = cfg.num_ues;
  const int L = cfg.num_aps;
  AuxiliaryState aux;
  aux.scheme = scheme;
  aux.receivers.resize(K);
  aux.weights.resize(K);
  for (int k = 0; k < K; ++k) {
    aux.receivers(k) = update_receiver(k, v, omega, csi, cfg);
    aux.weights(k) = update_weight(k, v, omega, aux.receivers(k), csi, cfg);
  }
  if (scheme == Scheme::WZ) {
    aux.wz_mats.reserve(L);
    for (int i = 0; i < L; ++i) aux.wz_mats.push_back(update_theta(i, v, omega));
  } else {
    aux.p2p_mats.reserve(L);
    for (int i = 0; i < L; ++i)
      aux.p2p_mats.push_back(update_sigma(i, v, omega));
  }
  return aux;
}

// Rate surrogate log2 w - w e / ln 2 + 1/ln 2; equals rate(k) when (u, w)
// are freshly updated, and lower-bounds it otherwise.
inline double surrogate_rate(double w, double e) {
  return std::log2(w) - w * e / kLn2 + 1.0 / kLn2;
}

}  // namespace stripesim
