// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <variant>

namespace amem {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thin SVD: A = U diag(sigma) V^T, sigma descending.
// For an m x n input with k = min(m, n): U is m x k, V is n x k.
struct SvdResult {
  DenseMatrix u;
  Vector sigma;
  DenseMatrix v;
};

// One-sided (Hestenes) Jacobi SVD. Stops when every column pair has
// |<a_i, a_j>| <= tol * |a_i| |a_j|. Throws InvalidArgument on non-finite input.
SvdResult svd(const DenseMatrix& a, double tol = 1e-12);

// Singular values at or below this fraction of sigma_max count as zero.
double rank_tolerance(const SvdResult& s);

struct ExactSign {};

// Odd quintic iteration X <- a X + b (X X^T) X + c (X X^T)^2 X applied after
// scaling A by its Frobenius norm.
struct NewtonSchulz {
  int iterations = 5;
  std::array<double, 3> coeffs = kConvergent;

  // Fixed point at 1 with p'(1) = p''(1) = 0; converges for all x in (0, 1].
  static constexpr std::array<double, 3> kConvergent{15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0};
  // Tuned coefficients common in Muon implementations. Fast, but only drives
  // singular values into roughly [0.7, 1.2].
  static constexpr std::array<double, 3> kMuon{3.4445, -4.7750, 2.0315};
};

using SignMethod = std::variant<ExactSign, NewtonSchulz>;

// msgn(A) = U sgn(Sigma) V^T with sgn(0) = 0.
// Exact: msgn(0) = 0. Newton-Schulz on a zero matrix throws InvalidArgument.
DenseMatrix matrix_sign(const DenseMatrix& a, const SignMethod& method = ExactSign{});

// Entrywise max norm: max_ij |a_ij|.
double max_norm(const DenseMatrix& a);

// Largest singular value.
double spectral_norm(const DenseMatrix& a);

bool all_finite(const DenseMatrix& a);

}  // namespace amem
