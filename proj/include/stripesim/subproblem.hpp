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

// Inner convex step of the alternating optimization. With the auxiliary
// variables (receivers u, weights w, linearization points Theta/Sigma)
// frozen, the remaining problem in the precoders v and quantizer
// covariances Omega is
//
//   minimize    sum_k w_k e_k(v, Omega, u_k)
//   subject to  sum_l v_l^H Q_c v_l + sum_i tr(M_{c,i} Omega_i)
//                 - sum_i c_{c,i} ln det Omega_i + k_c <= b_c      (front.)
//               sum_l ||block_i(v_l)||^2 + tr(Omega_i) <= P        (power)
//               Omega_i >= eps_pd I,
//
// a convex program: the objective is a convex quadratic, each fronthaul
// constraint is convex quadratic + linear trace - log-det. The rate
// variables of the original formulation are eliminated; maximizing the
// rate surrogate with fixed (u, w) is exactly minimizing sum_k w_k e_k.
//
// The solver is a standard log-barrier interior-point method on the
// realified variables x = ([Re v_k; Im v_k]_k, params(Omega_i)_i), where a
// Hermitian N x N matrix is parameterized by N^2 reals (diagonal, then
// (Re, Im) of each upper off-diagonal entry). Each barrier stage runs
// damped Newton with backtracking; the stage sequence multiplies t by 10
// until the duality-gap surrogate nu/t clears the target. The warm start
// supplied by the outer loop is made strictly feasible by shrinking the
// precoders, which works because every constraint is tight-or-slack in a
// direction the shrink strictly relaxes whenever the auxiliaries were
// refreshed at that same warm point.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "stripesim/channel.hpp"
#include "stripesim/config.hpp"
#include "stripesim/linalg.hpp"
#include "stripesim/metrics.hpp"
#include "stripesim/wmmse.hpp"

namespace stripesim {

struct SubproblemOptions {
  double tol_feas = 1e-7;
  double tol_kkt = 1e-6;
  int newton_cap_per_stage = 200;
  int max_barrier_stages = 12;
  double barrier_multiplier = 10.0;
  double barrier_t0 = 1.0;
};

enum class SubproblemStatus { converged, iteration_cap, fallback_to_warm_start };

inline std::string to_string(SubproblemStatus s) {
  switch (s) {
    case SubproblemStatus::converged: return "converged";
    case SubproblemStatus::iteration_cap: return "iteration-cap";
    default: return "fallback-to-warm-start";
  }
}

struct SubproblemSpec {
  Scheme scheme = Scheme::WZ;
  AuxiliaryState aux;
  const CsiRealization* csi = nullptr;  // caller keeps alive
  const NetworkConfig* cfg = nullptr;
  std::vector<double> fronthaul_budgets_bits;  // cumulative for WZ, per-link for P2P
  double power_budget = 0.0;
  SubproblemOptions options;
};

inline SubproblemSpec make_subproblem_spec(Scheme scheme,
                                           const AuxiliaryState& aux,
                                           const CsiRealization& csi,
                                           const NetworkConfig& cfg,
                                           const SubproblemOptions& options) {
  SubproblemSpec spec;
  spec.scheme = scheme;
  spec.aux = aux;
  spec.csi = &csi;
  spec.cfg = &cfg;
  spec.power_budget = cfg.tx_power;
  spec.options = options;
  const double b = cfg.per_block_budget_bits();
  spec.fronthaul_budgets_bits.resize(cfg.num_aps);
  for (int i = 0; i < cfg.num_aps; ++i)
    spec.fronthaul_budgets_bits[i] = scheme == Scheme::WZ ? (i + 1) * b : b;
  return spec;
}

struct SubproblemSolution {
  PrecoderSet precoders;
  QuantizerSet quantizers;
  double objective = 0.0;      // sum_k w_k e_k at the returned point
  double max_violation = 0.0;  // over surrogate fronthaul + power constraints
  double kkt_residual = 0.0;
  int newton_iterations = 0;
  SubproblemStatus status = SubproblemStatus::fallback_to_warm_start;
};

namespace detail {

// ---- Hermitian parameterization -----------------------------------------
// theta layout for an N x N Hermitian A: first N entries Re A_pp, then for
// p < q in row-major order the pair (Re A_pq, Im A_pq).

inline Eigen::VectorXd herm_params(const Eigen::MatrixXcd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::VectorXd theta(n * n);
  int idx = 0;
  for (int p = 0; p < n; ++p) theta(idx++) = a(p, p).real();
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      theta(idx++) = a(p, q).real();
      theta(idx++) = a(p, q).imag();
    }
  return theta;
}

inline Eigen::MatrixXcd herm_from_params(const Eigen::VectorXd& theta, int n) {
  Eigen::MatrixXcd a(n, n);
  int idx = 0;
  for (int p = 0; p < n; ++p) a(p, p) = theta(idx++);
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      const double re = theta(idx++);
      const double im = theta(idx++);
      a(p, q) = std::complex<double>(re, im);
      a(q, p) = std::complex<double>(re, -im);
    }
  return a;
}

// Pattern vector of tr(M H_j) over the parameter basis H_j; for Hermitian
// M this doubles as the exact gradient of theta -> tr(M Omega(theta)).
inline Eigen::VectorXd herm_pattern(const Eigen::MatrixXcd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd pat(n * n);
  int idx = 0;
  for (int p = 0; p < n; ++p) pat(idx++) = m(p, p).real();
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      pat(idx++) = 2.0 * m(p, q).real();
      pat(idx++) = 2.0 * m(p, q).imag();
    }
  return pat;
}

// Gram matrix G_{jm} = tr(W H_j W H_m): the Hessian of -ln det Omega at
// W = Omega^{-1}, positive definite for PD W.
inline Eigen::MatrixXd herm_gram(const Eigen::MatrixXcd& w) {
  const int n = static_cast<int>(w.rows());
  const int d = n * n;
  std::vector<Eigen::MatrixXcd> basis;
  basis.reserve(d);
  for (int p = 0; p < n; ++p) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    h(p, p) = 1.0;
    basis.push_back(h);
  }
  for (int p = 0; p < n; ++p)
    for (int q = p + 1; q < n; ++q) {
      Eigen::MatrixXcd ha = Eigen::MatrixXcd::Zero(n, n);
      ha(p, q) = 1.0;
      ha(q, p) = 1.0;
      basis.push_back(ha);
      Eigen::MatrixXcd hb = Eigen::MatrixXcd::Zero(n, n);
      hb(p, q) = std::complex<double>(0.0, 1.0);
      hb(q, p) = std::complex<double>(0.0, -1.0);
      basis.push_back(hb);
    }
  Eigen::MatrixXd gram(d, d);
  for (int j = 0; j < d; ++j) {
    const Eigen::MatrixXcd t = w * basis[j] * w;
    gram.row(j) = herm_pattern(t).transpose();
  }
  return 0.5 * (gram + gram.transpose());
}

// ---- Reduced problem data -------------------------------------------------

// One inequality sum_l v_l^H Q v_l + sum_i [tr(M_i Omega_i)
// - lndet_coeff_i ln det Omega_i] + constant <= bound, in nats.
struct QuadConstraint {
  Eigen::MatrixXcd Q;  // NL x NL Hermitian PSD
  std::vector<Eigen::MatrixXcd> M;
  std::vector<double> lndet_coeff;
  double constant = 0.0;
  double bound = 0.0;
};

struct ReducedProblem {
  int K = 0, L = 0, N = 0;
  Eigen::MatrixXcd B;     // quadratic objective kernel, NL x NL PSD
  Eigen::MatrixXcd Blin;  // linear terms, column k = w_k u_k hhat_k
  std::vector<Eigen::MatrixXcd> Mobj;  // objective trace term per AP
  double obj_constant = 0.0;
  std::vector<QuadConstraint> cons;  // fronthaul first, then power
  double floor_eps = 0.0;

  int nl() const { return N * L; }
  int dim() const { return 2 * nl() * K + L * N * N; }

  double objective(const Eigen::MatrixXcd& v,
                   const std::vector<Eigen::MatrixXcd>& omegas) const {
    double acc = obj_constant;
    acc += (v.conjugate().cwiseProduct(B * v)).sum().real();
    acc -= 2.0 * (Blin.conjugate().cwiseProduct(v)).sum().real();
    for (int i = 0; i < L; ++i)
      acc += (Mobj[i].conjugate().cwiseProduct(omegas[i])).sum().real();
    return acc;
  }

  // LHS of constraint c (nats); feasible iff <= cons[c].bound.
  double constraint_value(int c, const Eigen::MatrixXcd& v,
                          const std::vector<Eigen::MatrixXcd>& omegas) const {
    const QuadConstraint& qc = cons[c];
    double acc = qc.constant;
    acc += (v.conjugate().cwiseProduct(qc.Q * v)).sum().real();
    for (int i = 0; i < L; ++i) {
      if (qc.M[i].size() > 0)
        acc += (qc.M[i].conjugate().cwiseProduct(omegas[i])).sum().real();
      if (qc.lndet_coeff[i] != 0.0)
        acc -= qc.lndet_coeff[i] * lndet_hermitian(omegas[i]);
    }
    return acc;
  }
};

inline ReducedProblem build_reduced_problem(const SubproblemSpec& spec) {
  const NetworkConfig& cfg = *spec.cfg;
  const CsiRealization& csi = *spec.csi;
  const AuxiliaryState& aux = spec.aux;
  const int K = cfg.num_ues;
  const int L = cfg.num_aps;
  const int N = cfg.antennas_per_ap;
  const int NL = N * L;

  ReducedProblem p;
  p.K = K;
  p.L = L;
  p.N = N;
  p.floor_eps = pd_floor(cfg);

  p.B = Eigen::MatrixXcd::Zero(NL, NL);
  p.Blin = Eigen::MatrixXcd::Zero(NL, K);
  p.obj_constant = 0.0;
  for (int k = 0; k < K; ++k) {
    const double w = aux.weights(k);
    const std::complex<double> u = aux.receivers(k);
    const double wu2 = w * std::norm(u);
    const Eigen::VectorXcd hhat = csi.nominal_channels.col(k);
    p.B.noalias() += wu2 * (hhat * hhat.adjoint());
    for (int i = 0; i < L; ++i)
      p.B.block(i * N, i * N, N, N) +=
          wu2 * csi.error_variances(k, i) * Eigen::MatrixXcd::Identity(N, N);
    p.Blin.col(k) = (w * u) * hhat;
    p.obj_constant += w * (1.0 + std::norm(u) * cfg.noise_power);
  }
  p.Mobj.reserve(L);
  for (int i = 0; i < L; ++i) p.Mobj.push_back(p.B.block(i * N, i * N, N, N));

  // Fronthaul constraints. WZ prefix i couples Omega_0..Omega_i through the
  // inverse of Theta_i; P2P block i touches only Omega_i.
  for (int i = 0; i < L; ++i) {
    QuadConstraint qc;
    qc.M.assign(L, Eigen::MatrixXcd());
    qc.lndet_coeff.assign(L, 0.0);
    qc.bound = spec.fronthaul_budgets_bits[i] * kLn2;
    if (spec.scheme == Scheme::WZ) {
      const Eigen::MatrixXcd& theta = aux.wz_mats[i];
      const int m = (i + 1) * N;
      const Eigen::MatrixXcd w = hermitian_inverse(theta);
      qc.Q = Eigen::MatrixXcd::Zero(NL, NL);
      qc.Q.topLeftCorner(m, m) = w;
      for (int j = 0; j <= i; ++j) {
        qc.M[j] = w.block(j * N, j * N, N, N);
        qc.lndet_coeff[j] = 1.0;
      }
      qc.constant = lndet_hermitian(theta) - m;
    } else {
      const Eigen::MatrixXcd& sigma = aux.p2p_mats[i];
      const Eigen::MatrixXcd w = hermitian_inverse(sigma);
      qc.Q = Eigen::MatrixXcd::Zero(NL, NL);
      qc.Q.block(i * N, i * N, N, N) = w;
      qc.M[i] = w;
      qc.lndet_coeff[i] = 1.0;
      qc.constant = lndet_hermitian(sigma) - N;
    }
    p.cons.push_back(std::move(qc));
  }

  // Per-AP power.
  for (int i = 0; i < L; ++i) {
    QuadConstraint qc;
    qc.M.assign(L, Eigen::MatrixXcd());
    qc.lndet_coeff.assign(L, 0.0);
    qc.Q = Eigen::MatrixXcd::Zero(NL, NL);
    qc.Q.block(i * N, i * N, N, N) = Eigen::MatrixXcd::Identity(N, N);
    qc.M[i] = Eigen::MatrixXcd::Identity(N, N);
    qc.constant = 0.0;
    qc.bound = spec.power_budget;
    p.cons.push_back(std::move(qc));
  }
  return p;
}

// ---- Barrier solver --------------------------------------------------------

class BarrierSolver {
 public:
  BarrierSolver(const ReducedProblem& prob, const SubproblemOptions& opt)
      : p_(prob), opt_(opt) {
    nc_ = static_cast<int>(p_.cons.size());
    nu_ = nc_ + p_.L * p_.N;  // barrier complexity: scalars + floor blocks
    qreal_.reserve(nc_);
    for (const auto& c : p_.cons) qreal_.push_back(realify_quadratic(c.Q));
    breal_ = realify_quadratic(p_.B);
    mpat_.resize(nc_);
    for (int c = 0; c < nc_; ++c) {
      mpat_[c].assign(p_.L, Eigen::VectorXd());
      for (int i = 0; i < p_.L; ++i)
        if (p_.cons[c].M[i].size() > 0)
          mpat_[c][i] = herm_pattern(p_.cons[c].M[i]);
    }
    objpat_.reserve(p_.L);
    for (int i = 0; i < p_.L; ++i) objpat_.push_back(herm_pattern(p_.Mobj[i]));
  }

  struct Result {
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    double stat_residual = std::numeric_limits<double>::infinity();
    int newton_iterations = 0;
    bool started = false;
    bool gap_reached = false;
  };

  // Point evaluation shared by the line search (values only) and the
  // Newton step (values + derivatives).
  struct Eval {
    bool feasible = false;
    double f = 0.0;
    double psi = 0.0;
    Eigen::VectorXd slacks;
    Eigen::MatrixXcd V;
    std::vector<Eigen::MatrixXcd> omegas;
    std::vector<double> lndet_omega;
    double lndet_floor_sum = 0.0;
  };

  Eigen::VectorXd pack(const Eigen::MatrixXcd& v,
                       const std::vector<Eigen::MatrixXcd>& omegas) const {
    const int nl = p_.nl();
    Eigen::VectorXd x(p_.dim());
    for (int k = 0; k < p_.K; ++k) {
      x.segment(2 * nl * k, nl) = v.col(k).real();
      x.segment(2 * nl * k + nl, nl) = v.col(k).imag();
    }
    const int base = 2 * nl * p_.K;
    for (int i = 0; i < p_.L; ++i)
      x.segment(base + i * p_.N * p_.N, p_.N * p_.N) = herm_params(omegas[i]);
    return x;
  }

  void unpack(const Eigen::VectorXd& x, Eigen::MatrixXcd& v,
              std::vector<Eigen::MatrixXcd>& omegas) const {
    const int nl = p_.nl();
    v.resize(nl, p_.K);
    for (int k = 0; k < p_.K; ++k) {
      v.col(k).real() = x.segment(2 * nl * k, nl);
      v.col(k).imag() = x.segment(2 * nl * k + nl, nl);
    }
    const int base = 2 * nl * p_.K;
    omegas.resize(p_.L);
    for (int i = 0; i < p_.L; ++i)
      omegas[i] = herm_from_params(
          x.segment(base + i * p_.N * p_.N, p_.N * p_.N), p_.N);
  }

  // Values and the barrier merit at x for a given t; sets feasible=false
  // if any floor block loses positive definiteness or any slack closes.
  Eval evaluate(const Eigen::VectorXd& x, double t) const {
    Eval e;
    unpack(x, e.V, e.omegas);
    e.lndet_omega.resize(p_.L);
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(p_.N, p_.N);
    for (int i = 0; i < p_.L; ++i) {
      Eigen::LLT<Eigen::MatrixXcd> llt_o(e.omegas[i]);
      Eigen::LLT<Eigen::MatrixXcd> llt_f(e.omegas[i] - p_.floor_eps * eye);
      if (llt_o.info() != Eigen::Success || llt_f.info() != Eigen::Success)
        return e;
      e.lndet_omega[i] =
          2.0 *
          llt_o.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
      e.lndet_floor_sum +=
          2.0 *
          llt_f.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
    }
    e.f = p_.objective(e.V, e.omegas);
    e.slacks.resize(nc_);
    const int base = 2 * p_.nl() * p_.K;
    for (int c = 0; c < nc_; ++c) {
      const QuadConstraint& qc = p_.cons[c];
      double val = qc.constant;
      val += (e.V.conjugate().cwiseProduct(qc.Q * e.V)).sum().real();
      for (int i = 0; i < p_.L; ++i) {
        if (mpat_[c][i].size() > 0)
          val += mpat_[c][i].dot(
              x.segment(base + i * p_.N * p_.N, p_.N * p_.N));
        if (qc.lndet_coeff[i] != 0.0)
          val -= qc.lndet_coeff[i] * e.lndet_omega[i];
      }
      e.slacks(c) = qc.bound - val;
      if (!(e.slacks(c) > 0.0)) return e;
    }
    if (!std::isfinite(e.f)) return e;
    e.feasible = true;
    e.psi = e.f + (-e.slacks.array().log().sum() - e.lndet_floor_sum) / t;
    return e;
  }

  // Gradient and Hessian of psi_t = f + phi/t at a feasible evaluation.
  void derivatives(const Eval& e, double t, Eigen::VectorXd& grad,
                   Eigen::MatrixXd& hess) const {
    const int nl = p_.nl();
    const int n = p_.dim();
    const int base = 2 * nl * p_.K;
    const int d = p_.N * p_.N;
    grad.setZero(n);
    hess.setZero(n, n);

    // Inverses of Omega_i and of the floor-shifted blocks.
    std::vector<Eigen::MatrixXcd> w(p_.L), wflr(p_.L);
    std::vector<Eigen::VectorXd> wpat(p_.L);
    const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(p_.N, p_.N);
    for (int i = 0; i < p_.L; ++i) {
      w[i] = hermitian_inverse(e.omegas[i]);
      wflr[i] = hermitian_inverse(e.omegas[i] - p_.floor_eps * eye);
      wpat[i] = herm_pattern(w[i]);
    }

    // Objective parts.
    const Eigen::MatrixXcd bv = p_.B * e.V;
    Eigen::MatrixXcd gv = 2.0 * (bv - p_.Blin);  // complex v-gradient, per UE
    for (int i = 0; i < p_.L; ++i)
      grad.segment(base + i * d, d) = objpat_[i];

    // Constraint parts.
    Eigen::MatrixXd hv = 2.0 * breal_;  // per-UE diagonal block of the Hessian
    std::vector<Eigen::VectorXd> cons_grad(nc_);
    for (int c = 0; c < nc_; ++c) {
      const QuadConstraint& qc = p_.cons[c];
      const double s = e.slacks(c);
      const Eigen::MatrixXcd qv = qc.Q * e.V;
      Eigen::VectorXd a(n);
      for (int k = 0; k < p_.K; ++k) {
        a.segment(2 * nl * k, nl) = 2.0 * qv.col(k).real();
        a.segment(2 * nl * k + nl, nl) = 2.0 * qv.col(k).imag();
      }
      for (int i = 0; i < p_.L; ++i) {
        auto seg = a.segment(base + i * d, d);
        seg.setZero();
        if (mpat_[c][i].size() > 0) seg = mpat_[c][i];
        if (qc.lndet_coeff[i] != 0.0) seg -= qc.lndet_coeff[i] * wpat[i];
      }
      grad += a / (t * s);
      hess.selfadjointView<Eigen::Lower>().rankUpdate(a, 1.0 / (t * s * s));
      hv += (2.0 / (t * s)) * qreal_[c];
      cons_grad[c] = std::move(a);
    }

    // Log-det curvature: the quantizer blocks of constraint Hessians plus
    // the floor barrier, and the floor gradient.
    for (int i = 0; i < p_.L; ++i) {
      double coeff = 0.0;
      for (int c = 0; c < nc_; ++c)
        if (p_.cons[c].lndet_coeff[i] != 0.0)
          coeff += p_.cons[c].lndet_coeff[i] / (t * e.slacks(c));
      Eigen::MatrixXd block = herm_gram(wflr[i]) / t;
      if (coeff != 0.0) block += coeff * herm_gram(w[i]);
      hess.block(base + i * d, base + i * d, d, d) += block;
      grad.segment(base + i * d, d) -= herm_pattern(wflr[i]) / t;
    }

    // Per-UE v blocks (objective + constraint quadratics share hv).
    for (int k = 0; k < p_.K; ++k) {
      grad.segment(2 * nl * k, nl) += gv.col(k).real();
      grad.segment(2 * nl * k + nl, nl) += gv.col(k).imag();
      hess.block(2 * nl * k, 2 * nl * k, 2 * nl, 2 * nl) += hv;
    }
    hess = hess.selfadjointView<Eigen::Lower>();
  }

  // Shrink the warm precoders toward zero until every inequality holds
  // strictly. Works whenever the warm point is feasible for surrogates
  // linearized at itself; returns false otherwise.
  bool strictly_feasible_start(Eigen::MatrixXcd v,
                               const std::vector<Eigen::MatrixXcd>& omegas,
                               Eigen::VectorXd& x0) const {
    double delta = 0.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const Eigen::VectorXd x = pack((1.0 - delta) * v, omegas);
      const Eval e = evaluate(x, 1.0);
      if (e.feasible) {
        bool margin_ok = true;
        for (int c = 0; c < nc_; ++c)
          if (e.slacks(c) < 1e-12 * (1.0 + std::abs(p_.cons[c].bound)))
            margin_ok = false;
        if (margin_ok) {
          x0 = x;
          return true;
        }
      }
      if (delta >= 1.0) return false;
      delta = std::min(1.0, delta == 0.0 ? 1e-6 : 2.0 * delta);
    }
    return false;
  }

  Result minimize(const Eigen::MatrixXcd& warm_v,
                  const std::vector<Eigen::MatrixXcd>& warm_omegas) const {
    Result res;
    Eigen::VectorXd x;
    if (!strictly_feasible_start(warm_v, warm_omegas, x)) return res;
    res.started = true;

    const double gap_target = std::min(opt_.tol_kkt, 0.5 * opt_.tol_feas);
    double t = opt_.barrier_t0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    Eval e = evaluate(x, t);
    // Half the squared Newton decrement of the last step: the local model's
    // predicted remaining descent, an affine-invariant stationarity measure
    // in the same (objective) units as the gap surrogate nu/t.
    double last_decrement_half = std::numeric_limits<double>::infinity();

    for (int stage = 0; stage < opt_.max_barrier_stages; ++stage) {
      for (int it = 0; it < opt_.newton_cap_per_stage; ++it) {
        ++res.newton_iterations;
        derivatives(e, t, grad, hess);

        Eigen::VectorXd d;
        double ridge = 0.0;
        for (int tries = 0; tries < 6; ++tries) {
          Eigen::LLT<Eigen::MatrixXd> llt(
              ridge == 0.0
                  ? hess
                  : Eigen::MatrixXd(hess + ridge * Eigen::MatrixXd::Identity(
                                               hess.rows(), hess.cols())));
          if (llt.info() == Eigen::Success) {
            d = llt.solve(-grad);
            break;
          }
          ridge = ridge == 0.0 ? 1e-10 * (1.0 + hess.diagonal().maxCoeff())
                               : 100.0 * ridge;
        }
        if (d.size() == 0 || !d.allFinite()) break;

        const double gd = grad.dot(d);
        last_decrement_half = std::max(0.0, -0.5 * gd);
        if (last_decrement_half <= 1e-10 * (1.0 + std::abs(e.psi))) break;

        double alpha = 1.0;
        bool stepped = false;
        for (int ls = 0; ls < 60; ++ls) {
          const Eigen::VectorXd xn = x + alpha * d;
          const Eval en = evaluate(xn, t);
          if (en.feasible && en.psi <= e.psi + 0.25 * alpha * gd) {
            x = xn;
            e = en;
            stepped = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!stepped) break;
      }

      res.gap = nu_ / t;
      if (res.gap <= gap_target) {
        res.gap_reached = true;
        break;
      }
      if (stage + 1 < opt_.max_barrier_stages) {
        t *= opt_.barrier_multiplier;
        e = evaluate(x, t);
      }
    }

    res.x = x;
    res.objective = e.f;
    res.stat_residual = last_decrement_half;
    return res;
  }

  int num_constraints() const { return nc_; }
  double barrier_complexity() const { return nu_; }

 private:
  const ReducedProblem& p_;
  SubproblemOptions opt_;
  int nc_ = 0;
  double nu_ = 0.0;
  std::vector<Eigen::MatrixXd> qreal_;
  Eigen::MatrixXd breal_;
  std::vector<std::vector<Eigen::VectorXd>> mpat_;
  std::vector<Eigen::VectorXd> objpat_;
};

}  // namespace detail

// Solves the inner convex program from a warm start. Never throws on solver
// trouble: any candidate that is non-finite, infeasible beyond tol_feas, or
// worse than the warm start falls back to the warm start so the outer
// loop's monotonicity survives.
inline SubproblemSolution solve_subproblem(const SubproblemSpec& spec,
                                           const PrecoderSet& warm_v,
                                           const QuantizerSet& warm_omega) {
  const detail::ReducedProblem prob = detail::build_reduced_problem(spec);
  const detail::BarrierSolver solver(prob, spec.options);

  SubproblemSolution sol;
  sol.precoders = warm_v;
  sol.quantizers = warm_omega;
  const double f_warm = prob.objective(warm_v.V, warm_omega.omegas);
  sol.objective = f_warm;

  const detail::BarrierSolver::Result res =
      solver.minimize(warm_v.V, warm_omega.omegas);
  sol.newton_iterations = res.newton_iterations;
  if (!res.started) return sol;  // fallback: no strictly feasible start

  Eigen::MatrixXcd v;
  std::vector<Eigen::MatrixXcd> omegas;
  solver.unpack(res.x, v, omegas);

  double viol = 0.0;
  bool finite = v.allFinite();
  for (const auto& o : omegas) finite = finite && o.allFinite();
  if (finite)
    for (int c = 0; c < solver.num_constraints(); ++c)
      viol = std::max(viol, prob.constraint_value(c, v, omegas) -
                                prob.cons[c].bound);
  const double f_cand = finite ? prob.objective(v, omegas)
                               : std::numeric_limits<double>::infinity();

  if (!finite || viol > spec.options.tol_feas ||
      f_cand > f_warm + spec.options.tol_feas)
    return sol;  // fallback, warm start already loaded

  sol.precoders.V = v;
  sol.precoders.antennas_per_ap = spec.cfg->antennas_per_ap;
  sol.quantizers.omegas = omegas;
  sol.objective = f_cand;
  sol.max_violation = std::max(viol, 0.0);
  // Certified suboptimality of the reduced problem: centering error plus
  // the barrier gap surrogate, both in objective units.
  sol.kkt_residual = res.gap + res.stat_residual;
  sol.status = res.gap_reached && sol.kkt_residual <= spec.options.tol_kkt
                   ? SubproblemStatus::converged
                   : SubproblemStatus::iteration_cap;
  return sol;
}

}  // namespace stripesim
