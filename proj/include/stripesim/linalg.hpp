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
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace stripesim {

inline constexpr double kLn2 = 0.69314718055994530942;

// log-determinant of a Hermitian positive definite matrix via Cholesky,
// as twice the log-sum of the factor's diagonal. Never forms det itself,
// so it cannot overflow for well-conditioned large matrices.
inline double lndet_hermitian(const Eigen::MatrixXcd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("lndet_hermitian: matrix not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
}

inline double log2det_hermitian(const Eigen::MatrixXcd& a) {
  return lndet_hermitian(a) / kLn2;
}

inline bool is_positive_definite(const Eigen::MatrixXcd& a) {
  if (a.rows() == 0) return true;
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  return llt.info() == Eigen::Success;
}

// Inverse of a Hermitian positive definite matrix through its Cholesky
// factor; the result is re-symmetrized to suppress round-off skew.
inline Eigen::MatrixXcd hermitian_inverse(const Eigen::MatrixXcd& a) {
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("hermitian_inverse: matrix not positive definite");
  Eigen::MatrixXcd inv =
      llt.solve(Eigen::MatrixXcd::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.adjoint());
}

// Real embedding of a complex quadratic form: with x = [Re v; Im v],
// v^H Q v = x^T realify(Q) x for Hermitian Q.
inline Eigen::MatrixXd realify_quadratic(const Eigen::MatrixXcd& q) {
  const Eigen::Index n = q.rows();
  Eigen::MatrixXd out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = q.real();
  out.bottomRightCorner(n, n) = q.real();
  out.topRightCorner(n, n) = -q.imag();
  out.bottomLeftCorner(n, n) = q.imag();
  return out;
}

inline Eigen::VectorXd real_stack(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

inline Eigen::VectorXcd complex_unstack(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size() / 2;
  Eigen::VectorXcd v(n);
  v.real() = x.head(n);
  v.imag() = x.tail(n);
  return v;
}

}  // namespace stripesim
