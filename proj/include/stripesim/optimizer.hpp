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

// Alternating optimization of precoders and quantizer covariances. Each
// outer iteration refreshes the closed-form auxiliaries (receivers,
// weights, fronthaul linearization points) at the current iterate, then
// solves the resulting convex subproblem. The construction guarantees a
// non-decreasing true sum-rate: the surrogate is tight at the iterate and
// lower-bounds the truth everywhere else.

#include <cmath>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stripesim/channel.hpp"
#include "stripesim/config.hpp"
#include "stripesim/metrics.hpp"
#include "stripesim/subproblem.hpp"
#include "stripesim/wmmse.hpp"

namespace stripesim {

struct OptimizerConfig {
  Scheme scheme = Scheme::WZ;
  int max_outer_iterations = 100;
  double convergence_threshold = 1e-4;  // sum-rate change, bits/symbol
  SubproblemOptions subproblem;
  // Optimize as if the channel estimates were exact (error variances
  // forced to zero); final rates are still evaluated with the true errors.
  bool non_robust = false;
  std::ostream* log = nullptr;
};

enum class SolveStatus { converged, max_iterations, stalled };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max-iterations";
    default: return "stalled";
  }
}

// Signed slacks of the true constraints (not the surrogates). Power is in
// linear units, fronthaul in bits/symbol. For WZ the binding family on a
// serial fronthaul is the prefix sums: link i carries blocks 1..i's
// descriptions over the sweep, so the report normalizes each cumulative
// budget back to a per-block figure, slack_i = b - cumulative_i/(i+1).
// A later block may then overdraw its own per-link share while the prefix
// family stays within budget.
struct FeasibilityReport {
  Eigen::VectorXd power_slacks;      // L entries
  Eigen::VectorXd fronthaul_slacks;  // L entries

  double min_slack() const {
    return std::min(power_slacks.minCoeff(), fronthaul_slacks.minCoeff());
  }
};

inline FeasibilityReport check_feasibility(const PrecoderSet& v,
                                           const QuantizerSet& omega,
                                           const NetworkConfig& cfg,
                                           Scheme scheme) {
  const int L = cfg.num_aps;
  const double b = cfg.per_block_budget_bits();
  FeasibilityReport rep;
  rep.power_slacks.resize(L);
  rep.fronthaul_slacks.resize(L);
  for (int i = 0; i < L; ++i) {
    rep.power_slacks(i) = cfg.tx_power - per_ap_power(v, omega, i);
    rep.fronthaul_slacks(i) =
        scheme == Scheme::WZ ? b - cumulative_wz(i, v, omega) / (i + 1)
                             : b - g_p2p(i, v, omega);
  }
  return rep;
}

struct SolveResult {
  PrecoderSet precoders;
  QuantizerSet quantizers;
  Eigen::VectorXd per_ue_rates;  // true rates at the final point
  double sum_rate = 0.0;
  // Sum-rate after initialization and after every outer iteration. In
  // non-robust mode these are the rates the optimizer believes (zero
  // error variance), so the trace stays monotone even though the final
  // reported rates use the true errors.
  std::vector<double> objective_trace;
  FeasibilityReport slacks;
  int outer_iterations = 0;
  SolveStatus status = SolveStatus::max_iterations;
};

// Deterministic feasible starting point: equal quantizer covariances at
// half the power budget, matched-filter precoder directions, and one
// global precoder scale picked by bisection as the largest c in (0, 1]
// that keeps every per-AP power within budget and every per-link
// compression rate at slack >= tol_feas. c -> 0 always works: the
// compression rates vanish and the powers fall to tr(Omega_i) < P.
inline std::pair<PrecoderSet, QuantizerSet> initialize(
    const CsiRealization& csi, const NetworkConfig& cfg, Scheme scheme,
    double tol_feas = 1e-7) {
  const int K = cfg.num_ues;
  const int L = cfg.num_aps;
  const int N = cfg.antennas_per_ap;

  QuantizerSet omega =
      QuantizerSet::scaled_identity(cfg, cfg.tx_power / (2.0 * N));

  PrecoderSet dir = PrecoderSet::zero(cfg);
  const double amp = std::sqrt(cfg.tx_power * L / (2.0 * K));
  for (int k = 0; k < K; ++k) {
    const double nrm = csi.nominal_channels.col(k).norm();
    if (nrm > 0.0) dir.V.col(k) = amp / nrm * csi.nominal_channels.col(k);
  }

  const double budget = cfg.per_block_budget_bits();
  auto feasible = [&](double c) {
    PrecoderSet v = dir;
    v.V *= c;
    for (int i = 0; i < L; ++i) {
      if (per_ap_power(v, omega, i) > cfg.tx_power) return false;
      const double g =
          scheme == Scheme::WZ ? g_wz(i, v, omega) : g_p2p(i, v, omega);
      if (g > budget - tol_feas) return false;
    }
    return true;
  };

  double c = 0.0;
  if (feasible(1.0)) {
    c = 1.0;
  } else {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 30; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? lo : hi) = mid;
    }
    c = lo;
  }
  dir.V *= c;
  return {std::move(dir), std::move(omega)};
}

inline SolveResult run(const CsiRealization& csi, const NetworkConfig& cfg,
                       const OptimizerConfig& opt) {
  cfg.validate();
  const Scheme scheme = opt.scheme;

  CsiRealization belief = csi;
  if (opt.non_robust) belief.error_variances.setZero();

  auto [v, omega] = initialize(belief, cfg, scheme, opt.subproblem.tol_feas);

  auto believed_sum_rate = [&]() {
    double acc = 0.0;
    for (int k = 0; k < cfg.num_ues; ++k)
      acc += rate(k, v, omega, belief, cfg);
    return acc;
  };

  SolveResult result;
  double sr = believed_sum_rate();
  result.objective_trace.push_back(sr);
  result.status = SolveStatus::max_iterations;

  int consecutive_fallbacks = 0;
  for (int it = 0; it < opt.max_outer_iterations; ++it) {
    const AuxiliaryState aux =
        update_auxiliaries(scheme, v, omega, belief, cfg);
    const SubproblemSpec spec =
        make_subproblem_spec(scheme, aux, belief, cfg, opt.subproblem);
    const SubproblemSolution sol = solve_subproblem(spec, v, omega);
    ++result.outer_iterations;

    if (sol.status == SubproblemStatus::fallback_to_warm_start) {
      if (++consecutive_fallbacks >= 2) {
        result.status = SolveStatus::stalled;
        break;
      }
      continue;
    }
    consecutive_fallbacks = 0;
    v = sol.precoders;
    omega = sol.quantizers;

    const double sr_new = believed_sum_rate();
    result.objective_trace.push_back(sr_new);
    if (opt.log)
      (*opt.log) << "iter " << it + 1 << " sum_rate " << sr_new << " viol "
                 << sol.max_violation << " subproblem "
                 << to_string(sol.status) << "\n";
    if (std::abs(sr_new - sr) < opt.convergence_threshold) {
      sr = sr_new;
      result.status = SolveStatus::converged;
      break;
    }
    sr = sr_new;
  }

  result.precoders = v;
  result.quantizers = omega;
  result.per_ue_rates.resize(cfg.num_ues);
  for (int k = 0; k < cfg.num_ues; ++k)
    result.per_ue_rates(k) = rate(k, v, omega, csi, cfg);
  result.sum_rate = result.per_ue_rates.sum();
  result.slacks = check_feasibility(v, omega, cfg, scheme);
  return result;
}

}  // namespace stripesim
