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
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stripesim/channel.hpp"
#include "stripesim/config.hpp"
#include "stripesim/linalg.hpp"

namespace stripesim {

// Minimum-eigenvalue floor applied to every quantizer covariance so each
// log-det stays well defined. Far below solver tolerance; the optimum never
// touches Omega = 0 while the fronthaul capacity is finite.
inline double pd_floor(const NetworkConfig& cfg) {
  return 1e-9 * cfg.tx_power;
}

// Per-UE precoding vectors, stored as columns of an (N*L) x K matrix.
// Rows [i*N, (i+1)*N) belong to access point i; block extraction is an
// indexing contract, never a selector-matrix product.
struct PrecoderSet {
  Eigen::MatrixXcd V;  // (N*L) x K
  int antennas_per_ap = 0;

  int num_ues() const { return static_cast<int>(V.cols()); }
  int num_aps() const {
    return antennas_per_ap > 0 ? static_cast<int>(V.rows()) / antennas_per_ap
                               : 0;
  }

  Eigen::VectorXcd vec(int ue) const { return V.col(ue); }

  auto ap_block(int ue, int ap) {
    return V.col(ue).segment(ap * antennas_per_ap, antennas_per_ap);
  }
  auto ap_block(int ue, int ap) const {
    return V.col(ue).segment(ap * antennas_per_ap, antennas_per_ap);
  }

  static PrecoderSet zero(const NetworkConfig& cfg) {
    PrecoderSet p;
    p.antennas_per_ap = cfg.antennas_per_ap;
    p.V = Eigen::MatrixXcd::Zero(cfg.total_antennas(), cfg.num_ues);
    return p;
  }
};

// Quantization-noise covariances, one Hermitian PD N x N block per AP.
struct QuantizerSet {
  std::vector<Eigen::MatrixXcd> omegas;

  int num_aps() const { return static_cast<int>(omegas.size()); }
  int antennas_per_ap() const {
    return omegas.empty() ? 0 : static_cast<int>(omegas.front().rows());
  }

  // blockdiag(Omega_1..Omega_m); m = num_aps() when omitted.
  Eigen::MatrixXcd stacked(int m = -1) const {
    if (m < 0) m = num_aps();
    const int N = antennas_per_ap();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m * N, m * N);
    for (int i = 0; i < m; ++i) out.block(i * N, i * N, N, N) = omegas[i];
    return out;
  }

  static QuantizerSet scaled_identity(const NetworkConfig& cfg, double scale) {
    QuantizerSet q;
    q.omegas.assign(cfg.num_aps,
                    scale * Eigen::MatrixXcd::Identity(cfg.antennas_per_ap,
                                                       cfg.antennas_per_ap));
    return q;
  }
};

// Transmit power drawn by AP i: precoded signal power plus the quantization
// noise it forwards, sum_k ||block_i(v_k)||^2 + tr(Omega_i).
inline double per_ap_power(const PrecoderSet& v, const QuantizerSet& omega,
                           int i) {
  const int N = v.antennas_per_ap;
  return v.V.middleRows(i * N, N).squaredNorm() +
         omega.omegas[i].real().trace();
}

// |hhat_k^H v_k|^2, the useful signal power under nominal CSI.
inline double signal_power(int k, const PrecoderSet& v,
                           const CsiRealization& csi) {
  return std::norm(csi.nominal_channels.col(k).dot(v.V.col(k)));
}

// Interference-plus-noise at UE k:
//   sum_{l != k} |hhat_k^H v_l|^2            multi-user interference
//   + sum_l v_l^H E_k v_l                    CSI-error leakage
//   + tr((hhat_k hhat_k^H + E_k) Omegabar)   forwarded quantization noise
//   + noise_power.
inline double interference_noise(int k, const PrecoderSet& v,
                                 const QuantizerSet& omega,
                                 const CsiRealization& csi,
                                 const NetworkConfig& cfg) {
  const int N = cfg.antennas_per_ap;
  const Eigen::VectorXcd hhat = csi.nominal_channels.col(k);

  double acc = cfg.noise_power;
  for (int l = 0; l < v.num_ues(); ++l) {
    if (l != k) acc += std::norm(hhat.dot(v.V.col(l)));
    acc += csi.error_quadratic(k, v.V.col(l));
  }
  for (int i = 0; i < cfg.num_aps; ++i) {
    const Eigen::VectorXcd hb = hhat.segment(i * N, N);
    acc += (hb.adjoint() * omega.omegas[i] * hb).real()(0);
    acc += csi.error_variances(k, i) * omega.omegas[i].real().trace();
  }
  return acc;
}

inline double rate(int k, const PrecoderSet& v, const QuantizerSet& omega,
                   const CsiRealization& csi, const NetworkConfig& cfg) {
  const double in = interference_noise(k, v, omega, csi, cfg);
  return std::log2(1.0 + signal_power(k, v, csi) / in);
}

namespace detail {

// Gram matrix of the first m AP blocks of the precoder set,
// sum_l v_l v_l^H restricted to rows/cols < m*N, plus the matching
// quantizer blocks. This is the covariance the fronthaul rate functions
// take log-dets of.
inline Eigen::MatrixXcd prefix_covariance(const PrecoderSet& v,
                                          const QuantizerSet& omega, int m) {
  const int N = v.antennas_per_ap;
  const auto top = v.V.topRows(m * N);
  Eigen::MatrixXcd out = top * top.adjoint();
  for (int i = 0; i < m; ++i)
    out.block(i * N, i * N, N, N) += omega.omegas[i];
  return out;
}

}  // namespace detail

// Bits/symbol to forward block i under independent (point-to-point)
// compression: log2 det(B_ii + Omega_i) - log2 det(Omega_i), where B_ii is
// the i-th diagonal block of sum_l v_l v_l^H.
inline double g_p2p(int i, const PrecoderSet& v, const QuantizerSet& omega) {
  const int N = v.antennas_per_ap;
  const auto rows = v.V.middleRows(i * N, N);
  const Eigen::MatrixXcd block = rows * rows.adjoint();
  return log2det_hermitian(block + omega.omegas[i]) -
         log2det_hermitian(omega.omegas[i]);
}

// Bits/symbol for block i when blocks 1..i-1 act as decoder side
// information (Wyner-Ziv): the conditional-entropy difference of the
// prefix covariances minus the quantizer entropy.
inline double g_wz(int i, const PrecoderSet& v, const QuantizerSet& omega) {
  double acc = log2det_hermitian(detail::prefix_covariance(v, omega, i + 1)) -
               log2det_hermitian(omega.omegas[i]);
  if (i > 0)
    acc -= log2det_hermitian(detail::prefix_covariance(v, omega, i));
  return acc;
}

// sum_{j <= i} g_wz(j), evaluated in closed form; the prefix sums are what
// the serial fronthaul actually constrains.
inline double cumulative_wz(int i, const PrecoderSet& v,
                            const QuantizerSet& omega) {
  double acc = log2det_hermitian(detail::prefix_covariance(v, omega, i + 1));
  for (int j = 0; j <= i; ++j) acc -= log2det_hermitian(omega.omegas[j]);
  return acc;
}

// Transfer schedule of the serial fronthaul: in slot t (1-based), block B_i
// for i <= t travels on link F_{L+i-t+1}. Returned pairs are the 1-based
// (block, link) labels. Documentation/validation output only.
inline std::vector<std::pair<int, int>> fronthaul_schedule(int L, int t) {
  if (t < 1 || t > L) throw std::out_of_range("fronthaul_schedule: bad slot");
  std::vector<std::pair<int, int>> out;
  out.reserve(t);
  for (int i = 1; i <= t; ++i) out.emplace_back(i, L + i - t + 1);
  return out;
}

struct RateReport {
  Eigen::VectorXd per_ue_rates;          // bits/symbol
  double sum_rate = 0.0;                 // bits/symbol
  Eigen::VectorXd interference;          // per-UE linear power
  Eigen::VectorXd ap_powers;             // per-AP linear power
  Eigen::VectorXd compression_rates;     // per-AP bits/symbol, active scheme
};

inline RateReport rate_report(const PrecoderSet& v, const QuantizerSet& omega,
                              const CsiRealization& csi,
                              const NetworkConfig& cfg, Scheme scheme) {
  const int K = cfg.num_ues;
  const int L = cfg.num_aps;
  RateReport r;
  r.per_ue_rates.resize(K);
  r.interference.resize(K);
  r.ap_powers.resize(L);
  r.compression_rates.resize(L);
  for (int k = 0; k < K; ++k) {
    r.interference(k) = interference_noise(k, v, omega, csi, cfg);
    r.per_ue_rates(k) =
        std::log2(1.0 + signal_power(k, v, csi) / r.interference(k));
  }
  r.sum_rate = r.per_ue_rates.sum();
  for (int i = 0; i < L; ++i) {
    r.ap_powers(i) = per_ap_power(v, omega, i);
    r.compression_rates(i) =
        scheme == Scheme::WZ ? g_wz(i, v, omega) : g_p2p(i, v, omega);
  }
  return r;
}

}  // namespace stripesim
