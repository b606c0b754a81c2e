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

#include <catch2/catch_amalgamated.hpp>

#include "stripesim/channel.hpp"
#include "stripesim/metrics.hpp"
#include "stripesim/optimizer.hpp"
#include "stripesim/rng.hpp"
#include "stripesim/subproblem.hpp"
#include "stripesim/wmmse.hpp"

using namespace stripesim;
using stripesim::detail::BarrierSolver;
using stripesim::detail::ReducedProblem;
using stripesim::detail::build_reduced_problem;
using stripesim::detail::herm_from_params;
using stripesim::detail::herm_gram;
using stripesim::detail::herm_params;
using stripesim::detail::herm_pattern;

namespace {

Eigen::MatrixXcd random_hermitian(int n, Rng& rng) {
  Eigen::MatrixXcd a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = rng.complex_gaussian(1.0);
  return 0.5 * (a + a.adjoint()).eval();
}

Eigen::MatrixXcd random_pd(int n, Rng& rng, double ridge = 0.3) {
  Eigen::MatrixXcd a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = rng.complex_gaussian(1.0);
  return (a * a.adjoint() + ridge * Eigen::MatrixXcd::Identity(n, n)).eval();
}

struct Instance {
  NetworkConfig cfg;
  CsiRealization csi;
  PrecoderSet warm_v;
  QuantizerSet warm_q;
};

// Warm point feasible for the true constraints: matched beams at moderate
// power, quantizers at P / (4N) I, which keeps every per-link rate small.
Instance make_instance(std::uint64_t seed, int K, int L, int N,
                       double capacity = 4.0) {
  Instance inst;
  inst.cfg.num_ues = K;
  inst.cfg.num_aps = L;
  inst.cfg.antennas_per_ap = N;
  inst.cfg.fronthaul_capacity = capacity;
  const Topology topo = generate_topology(inst.cfg, derive_seed(seed, 0));
  inst.csi = sample_csi(topo, inst.cfg, derive_seed(seed, 1));

  inst.warm_v = PrecoderSet::zero(inst.cfg);
  const double amp = std::sqrt(inst.cfg.tx_power / (4.0 * K));
  for (int k = 0; k < K; ++k) {
    const double nrm = inst.csi.nominal_channels.col(k).norm();
    if (nrm > 0.0)
      inst.warm_v.V.col(k) = amp * inst.csi.nominal_channels.col(k) / nrm;
  }
  inst.warm_q =
      QuantizerSet::scaled_identity(inst.cfg, inst.cfg.tx_power / (4.0 * N));
  return inst;
}

SubproblemSpec make_spec(const Instance& inst, Scheme scheme,
                         const AuxiliaryState& aux) {
  return make_subproblem_spec(scheme, aux, inst.csi, inst.cfg,
                              SubproblemOptions{});
}

}  // namespace

TEST_CASE("hermitian parameterization round-trips") {
  Rng rng(301);
  for (int n : {1, 2, 3, 4}) {
    const Eigen::MatrixXcd a = random_hermitian(n, rng);
    const Eigen::VectorXd theta = herm_params(a);
    REQUIRE(theta.size() == n * n);
    REQUIRE((herm_from_params(theta, n) - a).norm() < 1e-14);

    Eigen::VectorXd t2(n * n);
    for (int j = 0; j < n * n; ++j) t2(j) = rng.uniform() - 0.5;
    REQUIRE((herm_params(herm_from_params(t2, n)) - t2).norm() < 1e-14);
  }
}

TEST_CASE("trace pattern is the exact linear representation") {
  Rng rng(302);
  for (int n : {1, 2, 3}) {
    const Eigen::MatrixXcd m = random_hermitian(n, rng);
    const Eigen::VectorXd pat = herm_pattern(m);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXcd omega = random_hermitian(n, rng);
      const double want = (m * omega).trace().real();
      REQUIRE(pat.dot(herm_params(omega)) == Catch::Approx(want).margin(1e-12));
    }
  }
}

TEST_CASE("gram matrix matches the lndet hessian by finite differences") {
  Rng rng(303);
  const int n = 3;
  const Eigen::MatrixXcd omega = random_pd(n, rng, 0.8);
  const Eigen::VectorXd theta0 = herm_params(omega);
  const Eigen::MatrixXd gram = herm_gram(hermitian_inverse(omega));

  // gradient of -lndet at theta is -pattern(Omega^{-1})
  auto grad_at = [&](const Eigen::VectorXd& th) {
    return Eigen::VectorXd(
        -herm_pattern(hermitian_inverse(herm_from_params(th, n))));
  };
  const double h = 1e-6;
  for (int j = 0; j < n * n; ++j) {
    Eigen::VectorXd tp = theta0, tm = theta0;
    tp(j) += h;
    tm(j) -= h;
    const Eigen::VectorXd col = (grad_at(tp) - grad_at(tm)) / (2.0 * h);
    REQUIRE((col - gram.col(j)).norm() < 1e-5 * (1.0 + gram.col(j).norm()));
  }
}

TEST_CASE("realified quadratic preserves hermitian forms") {
  Rng rng(304);
  const int n = 4;
  const Eigen::MatrixXcd q = random_pd(n, rng);
  const Eigen::MatrixXd qr = realify_quadratic(q);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXcd v(n);
    for (int r = 0; r < n; ++r) v(r) = rng.complex_gaussian(1.0);
    Eigen::VectorXd vr(2 * n);
    vr << v.real(), v.imag();
    const double want = (v.adjoint() * q * v).real()(0);
    REQUIRE(vr.dot(qr * vr) == Catch::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("reduced objective equals the weighted mse sum everywhere") {
  const Instance inst = make_instance(311, 3, 3, 2);
  const AuxiliaryState aux = update_auxiliaries(Scheme::WZ, inst.warm_v,
                                                inst.warm_q, inst.csi,
                                                inst.cfg);
  const SubproblemSpec spec = make_spec(inst, Scheme::WZ, aux);
  const ReducedProblem prob = build_reduced_problem(spec);

  Rng rng(312);
  for (int trial = 0; trial < 8; ++trial) {
    PrecoderSet v = PrecoderSet::zero(inst.cfg);
    for (int k = 0; k < inst.cfg.num_ues; ++k)
      for (int r = 0; r < inst.cfg.total_antennas(); ++r)
        v.V(r, k) = rng.complex_gaussian(0.5);
    QuantizerSet q;
    for (int i = 0; i < inst.cfg.num_aps; ++i)
      q.omegas.push_back(random_pd(inst.cfg.antennas_per_ap, rng, 0.1));

    double want = 0.0;
    for (int k = 0; k < inst.cfg.num_ues; ++k)
      want += aux.weights(k) *
              mse(k, v, q, aux.receivers(k), inst.csi, inst.cfg);
    REQUIRE(prob.objective(v.V, q.omegas) ==
            Catch::Approx(want).epsilon(1e-10));
  }

  // With freshly updated auxiliaries each w_k e_k is exactly 1.
  REQUIRE(prob.objective(inst.warm_v.V, inst.warm_q.omegas) ==
          Catch::Approx(static_cast<double>(inst.cfg.num_ues))
              .epsilon(1e-12));
}

TEST_CASE("constraints are tight at the linearization point") {
  const Instance inst = make_instance(321, 2, 3, 2);
  const int L = inst.cfg.num_aps;

  for (Scheme scheme : {Scheme::WZ, Scheme::P2P}) {
    const AuxiliaryState aux = update_auxiliaries(scheme, inst.warm_v,
                                                  inst.warm_q, inst.csi,
                                                  inst.cfg);
    const SubproblemSpec spec = make_spec(inst, scheme, aux);
    const ReducedProblem prob = build_reduced_problem(spec);
    REQUIRE(prob.cons.size() == static_cast<std::size_t>(2 * L));

    const double b = inst.cfg.per_block_budget_bits();
    for (int i = 0; i < L; ++i) {
      const double lhs =
          prob.constraint_value(i, inst.warm_v.V, inst.warm_q.omegas);
      const double true_bits = scheme == Scheme::WZ
                                   ? cumulative_wz(i, inst.warm_v, inst.warm_q)
                                   : g_p2p(i, inst.warm_v, inst.warm_q);
      REQUIRE(lhs == Catch::Approx(true_bits * kLn2).epsilon(1e-9));
      REQUIRE(prob.cons[i].bound ==
              Catch::Approx((scheme == Scheme::WZ ? (i + 1) * b : b) * kLn2));

      // Power rows follow the fronthaul rows.
      REQUIRE(prob.constraint_value(L + i, inst.warm_v.V,
                                    inst.warm_q.omegas) ==
              Catch::Approx(per_ap_power(inst.warm_v, inst.warm_q, i))
                  .epsilon(1e-12));
      REQUIRE(prob.cons[L + i].bound == inst.cfg.tx_power);
    }
  }
}

TEST_CASE("surrogate constraints upper-bound the true rates off-point") {
  const Instance inst = make_instance(322, 2, 3, 2);
  const AuxiliaryState aux = update_auxiliaries(Scheme::WZ, inst.warm_v,
                                                inst.warm_q, inst.csi,
                                                inst.cfg);
  const ReducedProblem prob =
      build_reduced_problem(make_spec(inst, Scheme::WZ, aux));

  Rng rng(323);
  for (int trial = 0; trial < 6; ++trial) {
    PrecoderSet v = PrecoderSet::zero(inst.cfg);
    for (int k = 0; k < inst.cfg.num_ues; ++k)
      for (int r = 0; r < inst.cfg.total_antennas(); ++r)
        v.V(r, k) = rng.complex_gaussian(0.5);
    QuantizerSet q;
    for (int i = 0; i < inst.cfg.num_aps; ++i)
      q.omegas.push_back(random_pd(inst.cfg.antennas_per_ap, rng, 0.1));
    for (int i = 0; i < inst.cfg.num_aps; ++i)
      REQUIRE(prob.constraint_value(i, v.V, q.omegas) >=
              cumulative_wz(i, v, q) * kLn2 - 1e-9);
  }
}

TEST_CASE("objective and constraints pass a midpoint convexity audit") {
  const Instance inst = make_instance(331, 2, 2, 2);
  for (Scheme scheme : {Scheme::WZ, Scheme::P2P}) {
    const AuxiliaryState aux = update_auxiliaries(scheme, inst.warm_v,
                                                  inst.warm_q, inst.csi,
                                                  inst.cfg);
    const ReducedProblem prob =
        build_reduced_problem(make_spec(inst, scheme, aux));

    Rng rng(332);
    for (int trial = 0; trial < 12; ++trial) {
      auto draw = [&](Eigen::MatrixXcd& v, std::vector<Eigen::MatrixXcd>& o) {
        v.resize(inst.cfg.total_antennas(), inst.cfg.num_ues);
        for (int c = 0; c < v.cols(); ++c)
          for (int r = 0; r < v.rows(); ++r)
            v(r, c) = rng.complex_gaussian(1.0);
        o.clear();
        for (int i = 0; i < inst.cfg.num_aps; ++i)
          o.push_back(random_pd(inst.cfg.antennas_per_ap, rng, 0.2));
      };
      Eigen::MatrixXcd va, vb;
      std::vector<Eigen::MatrixXcd> oa, ob;
      draw(va, oa);
      draw(vb, ob);
      Eigen::MatrixXcd vm = 0.5 * (va + vb);
      std::vector<Eigen::MatrixXcd> om;
      for (int i = 0; i < inst.cfg.num_aps; ++i)
        om.push_back(0.5 * (oa[i] + ob[i]));

      REQUIRE(prob.objective(vm, om) <=
              0.5 * (prob.objective(va, oa) + prob.objective(vb, ob)) + 1e-9);
      for (std::size_t c = 0; c < prob.cons.size(); ++c)
        REQUIRE(prob.constraint_value(static_cast<int>(c), vm, om) <=
                0.5 * (prob.constraint_value(static_cast<int>(c), va, oa) +
                       prob.constraint_value(static_cast<int>(c), vb, ob)) +
                    1e-9);
    }
  }
}

TEST_CASE("barrier derivatives match finite differences") {
  const Instance inst = make_instance(341, 2, 2, 2);
  const AuxiliaryState aux = update_auxiliaries(Scheme::WZ, inst.warm_v,
                                                inst.warm_q, inst.csi,
                                                inst.cfg);
  const SubproblemSpec spec = make_spec(inst, Scheme::WZ, aux);
  const ReducedProblem prob = build_reduced_problem(spec);
  const BarrierSolver solver(prob, spec.options);

  Eigen::VectorXd x0;
  REQUIRE(solver.strictly_feasible_start(inst.warm_v.V, inst.warm_q.omegas,
                                         x0));
  const double t = 3.7;
  const BarrierSolver::Eval e0 = solver.evaluate(x0, t);
  REQUIRE(e0.feasible);

  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  solver.derivatives(e0, t, grad, hess);
  REQUIRE((hess - hess.transpose()).norm() < 1e-10 * (1.0 + hess.norm()));

  const double h = 1e-6;
  for (int j = 0; j < x0.size(); ++j) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    const BarrierSolver::Eval ep = solver.evaluate(xp, t);
    const BarrierSolver::Eval em = solver.evaluate(xm, t);
    REQUIRE(ep.feasible);
    REQUIRE(em.feasible);
    const double fd = (ep.psi - em.psi) / (2.0 * h);
    REQUIRE(fd == Catch::Approx(grad(j)).margin(2e-4 * (1.0 + grad.norm())));
  }

  Rng rng(342);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd d(x0.size());
    for (int j = 0; j < d.size(); ++j) d(j) = rng.uniform() - 0.5;
    d.normalize();
    const double hd = 1e-4;
    const BarrierSolver::Eval ep = solver.evaluate(x0 + hd * d, t);
    const BarrierSolver::Eval em = solver.evaluate(x0 - hd * d, t);
    REQUIRE(ep.feasible);
    REQUIRE(em.feasible);
    const double fd = (ep.psi - 2.0 * e0.psi + em.psi) / (hd * hd);
    const double want = d.dot(hess * d);
    REQUIRE(fd == Catch::Approx(want).margin(1e-3 * (1.0 + std::abs(want))));
  }
}

TEST_CASE("solver matches a dense grid oracle on the scalar problem") {
  const Instance inst = make_instance(351, 1, 1, 1, 2.0);
  const AuxiliaryState aux = update_auxiliaries(Scheme::P2P, inst.warm_v,
                                                inst.warm_q, inst.csi,
                                                inst.cfg);
  const SubproblemSpec spec = make_spec(inst, Scheme::P2P, aux);
  const ReducedProblem prob = build_reduced_problem(spec);
  const SubproblemSolution sol =
      solve_subproblem(spec, inst.warm_v, inst.warm_q);
  REQUIRE(sol.status == SubproblemStatus::converged);

  // Scalar data: f = B r^2 - 2 r |b| + M w + c0 with the optimal phase of v
  // aligned to b; the fronthaul row is q r^2 + m w - ln w + k <= bound.
  const double B = prob.B(0, 0).real();
  const std::complex<double> blin = prob.Blin(0, 0);
  const double M = prob.Mobj[0](0, 0).real();
  const double qf = prob.cons[0].Q(0, 0).real();
  const double mf = prob.cons[0].M[0](0, 0).real();
  const double kf = prob.cons[0].constant;
  const double bf = prob.cons[0].bound;
  const double P = inst.cfg.tx_power;

  double best = std::numeric_limits<double>::infinity();
  const int G = 700;
  const double floor = pd_floor(inst.cfg);
  for (int a = 0; a <= G; ++a) {
    const double r = std::sqrt(P) * a / G;
    for (int bb = 0; bb <= G; ++bb) {
      const double w =
          floor * std::pow(P / floor, static_cast<double>(bb) / G);
      if (r * r + w > P) continue;
      if (qf * r * r + mf * w - std::log(w) + kf > bf) continue;
      best = std::min(best,
                      B * r * r - 2.0 * r * std::abs(blin) + M * w +
                          prob.obj_constant);
    }
  }
  REQUIRE(std::isfinite(best));
  REQUIRE(sol.objective <= best + 1e-4);
  REQUIRE(sol.objective >= best - 0.03 * (1.0 + std::abs(best)));

  // The optimal precoder phase aligns with the linear term.
  const std::complex<double> v = sol.precoders.V(0, 0);
  if (std::abs(v) > 1e-6)
    REQUIRE((v / std::abs(v) * std::conj(blin / std::abs(blin))).real() >=
            1.0 - 1e-6);
}

TEST_CASE("solutions are feasible and never worse than the warm start") {
  for (std::uint64_t seed : {361, 362, 363}) {
    for (Scheme scheme : {Scheme::WZ, Scheme::P2P}) {
      const Instance inst = make_instance(seed, 3, 3, 2);
      const AuxiliaryState aux = update_auxiliaries(scheme, inst.warm_v,
                                                    inst.warm_q, inst.csi,
                                                    inst.cfg);
      const SubproblemSpec spec = make_spec(inst, scheme, aux);
      const ReducedProblem prob = build_reduced_problem(spec);
      const double f_warm =
          prob.objective(inst.warm_v.V, inst.warm_q.omegas);
      const SubproblemSolution sol =
          solve_subproblem(spec, inst.warm_v, inst.warm_q);

      REQUIRE(sol.status != SubproblemStatus::fallback_to_warm_start);
      REQUIRE(sol.objective <= f_warm + spec.options.tol_feas);
      REQUIRE(sol.max_violation <= spec.options.tol_feas);
      REQUIRE(sol.newton_iterations > 0);

      // True constraints hold too: the surrogates dominate them.
      const double b = inst.cfg.per_block_budget_bits();
      for (int i = 0; i < inst.cfg.num_aps; ++i) {
        if (scheme == Scheme::WZ)
          REQUIRE(cumulative_wz(i, sol.precoders, sol.quantizers) <=
                  (i + 1) * b + 1e-6);
        else
          REQUIRE(g_p2p(i, sol.precoders, sol.quantizers) <= b + 1e-6);
        REQUIRE(per_ap_power(sol.precoders, sol.quantizers, i) <=
                inst.cfg.tx_power + 1e-6);
      }

      // Improving the weighted-MSE surrogate cannot lower the believed
      // sum-rate when the auxiliaries were refreshed at the warm point.
      double sum_warm = 0.0, sum_new = 0.0;
      for (int k = 0; k < inst.cfg.num_ues; ++k) {
        sum_warm += rate(k, inst.warm_v, inst.warm_q, inst.csi, inst.cfg);
        sum_new += rate(k, sol.precoders, sol.quantizers, inst.csi, inst.cfg);
      }
      REQUIRE(sum_new >= sum_warm - 1e-9);
    }
  }
}

TEST_CASE("resolving at a converged point changes nothing material") {
  const Instance inst = make_instance(371, 2, 2, 1);
  PrecoderSet v = inst.warm_v;
  QuantizerSet q = inst.warm_q;

  // A few outer rounds to land near a fixed point of the alternation.
  for (int round = 0; round < 25; ++round) {
    const AuxiliaryState aux =
        update_auxiliaries(Scheme::WZ, v, q, inst.csi, inst.cfg);
    const SubproblemSolution sol =
        solve_subproblem(make_spec(inst, Scheme::WZ, aux), v, q);
    v = sol.precoders;
    q = sol.quantizers;
  }

  const AuxiliaryState aux =
      update_auxiliaries(Scheme::WZ, v, q, inst.csi, inst.cfg);
  const SubproblemSpec spec = make_spec(inst, Scheme::WZ, aux);
  const ReducedProblem prob = build_reduced_problem(spec);
  const double f_warm = prob.objective(v.V, q.omegas);
  REQUIRE(f_warm ==
          Catch::Approx(static_cast<double>(inst.cfg.num_ues)).epsilon(1e-9));

  const SubproblemSolution sol = solve_subproblem(spec, v, q);
  REQUIRE(sol.status == SubproblemStatus::converged);
  REQUIRE(sol.kkt_residual <= spec.options.tol_kkt);
  REQUIRE(sol.objective >= f_warm - 1e-3);
  REQUIRE(sol.objective <= f_warm + spec.options.tol_feas);
}

TEST_CASE("single-ap chain makes the two schemes identical") {
  const Instance inst = make_instance(381, 2, 1, 2);
  const AuxiliaryState aux_wz = update_auxiliaries(Scheme::WZ, inst.warm_v,
                                                   inst.warm_q, inst.csi,
                                                   inst.cfg);
  const AuxiliaryState aux_p2p = update_auxiliaries(Scheme::P2P, inst.warm_v,
                                                    inst.warm_q, inst.csi,
                                                    inst.cfg);
  const SubproblemSolution a =
      solve_subproblem(make_spec(inst, Scheme::WZ, aux_wz), inst.warm_v,
                       inst.warm_q);
  const SubproblemSolution b =
      solve_subproblem(make_spec(inst, Scheme::P2P, aux_p2p), inst.warm_v,
                       inst.warm_q);
  REQUIRE(a.objective == b.objective);
  REQUIRE((a.precoders.V - b.precoders.V).norm() == 0.0);
  REQUIRE((a.quantizers.omegas[0] - b.quantizers.omegas[0]).norm() == 0.0);
}

TEST_CASE("larger fronthaul budgets can only improve the optimum") {
  // Same objective (same auxiliaries, refreshed at a warm point feasible for
  // the tight budgets) minimized over nested feasible sets.
  Instance inst = make_instance(391, 2, 2, 1, 1.0);
  std::tie(inst.warm_v, inst.warm_q) =
      initialize(inst.csi, inst.cfg, Scheme::WZ);
  const AuxiliaryState aux = update_auxiliaries(Scheme::WZ, inst.warm_v,
                                                inst.warm_q, inst.csi,
                                                inst.cfg);
  const SubproblemSpec spec_tight = make_spec(inst, Scheme::WZ, aux);
  SubproblemSpec spec_loose = spec_tight;
  for (double& bgt : spec_loose.fronthaul_budgets_bits) bgt *= 3.0;

  const SubproblemSolution st =
      solve_subproblem(spec_tight, inst.warm_v, inst.warm_q);
  const SubproblemSolution sl =
      solve_subproblem(spec_loose, inst.warm_v, inst.warm_q);
  REQUIRE(st.status != SubproblemStatus::fallback_to_warm_start);
  REQUIRE(sl.status != SubproblemStatus::fallback_to_warm_start);
  REQUIRE(sl.objective <= st.objective + 1e-8);
}

TEST_CASE("impossible budgets fall back to the warm start") {
  const Instance inst = make_instance(392, 2, 2, 1);
  const AuxiliaryState aux = update_auxiliaries(Scheme::WZ, inst.warm_v,
                                                inst.warm_q, inst.csi,
                                                inst.cfg);
  SubproblemSpec spec = make_spec(inst, Scheme::WZ, aux);
  for (double& bgt : spec.fronthaul_budgets_bits) bgt = -10.0;

  const ReducedProblem prob = build_reduced_problem(spec);
  const double f_warm = prob.objective(inst.warm_v.V, inst.warm_q.omegas);
  const SubproblemSolution sol =
      solve_subproblem(spec, inst.warm_v, inst.warm_q);
  REQUIRE(sol.status == SubproblemStatus::fallback_to_warm_start);
  REQUIRE(sol.objective == f_warm);
  REQUIRE((sol.precoders.V - inst.warm_v.V).norm() == 0.0);
  REQUIRE(to_string(sol.status) == "fallback-to-warm-start");
}
