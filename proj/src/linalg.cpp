// SPDX-License-Identifier: Apache-2.0
#include "amem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "amem/errors.hpp"

namespace amem {
namespace {

constexpr int kMaxSweeps = 80;

// Orthogonalizes the columns of `u` (m >= n) in place, accumulating rotations in `v`.
void jacobi_sweeps(DenseMatrix& u, DenseMatrix& v, double tol) {
  const Eigen::Index m = u.rows();
  const Eigen::Index n = u.cols();
  std::vector<double> norm2(static_cast<size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) norm2[j] = u.col(j).squaredNorm();

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double* up = u.col(p).data();
        double* uq = u.col(q).data();
        double gamma = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) gamma += up[i] * uq[i];
        const double alpha = norm2[p];
        const double beta = norm2[q];
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;
        rotated = true;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        double np = 0.0;
        double nq = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
          const double a = up[i];
          const double b = uq[i];
          up[i] = c * a - s * b;
          uq[i] = s * a + c * b;
          np += up[i] * up[i];
          nq += uq[i] * uq[i];
        }
        norm2[p] = np;
        norm2[q] = nq;
        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Eigen::Index i = 0; i < n; ++i) {
          const double a = vp[i];
          const double b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
    if (!rotated) return;
  }
}

// Replaces columns flagged in `missing` with unit vectors orthogonal to every other column.
void complete_basis(DenseMatrix& u, const std::vector<bool>& missing) {
  const Eigen::Index m = u.rows();
  Eigen::Index next_candidate = 0;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (!missing[j]) continue;
    for (; next_candidate < m; ++next_candidate) {
      Vector x = Vector::Unit(m, next_candidate);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < u.cols(); ++k) {
          if (k == j || (missing[k] && k > j)) continue;
          x -= u.col(k).dot(x) * u.col(k);
        }
      }
      const double nx = x.norm();
      if (nx > 0.5) {
        u.col(j) = x / nx;
        ++next_candidate;
        break;
      }
    }
  }
}

SvdResult svd_tall(const DenseMatrix& a, double tol) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const double scale = a.cwiseAbs().maxCoeff();
  SvdResult out;
  if (scale == 0.0) {
    out.sigma = Vector::Zero(n);
    out.u = DenseMatrix::Identity(m, n);
    out.v = DenseMatrix::Identity(n, n);
    return out;
  }
  DenseMatrix u = a / scale;
  DenseMatrix v = DenseMatrix::Identity(n, n);
  jacobi_sweeps(u, v, tol);

  Vector norms(n);
  for (Eigen::Index j = 0; j < n; ++j) norms[j] = u.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return norms[x] > norms[y]; });

  out.u.resize(m, n);
  out.v.resize(n, n);
  out.sigma.resize(n);
  std::vector<bool> missing(static_cast<size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index j = order[static_cast<size_t>(k)];
    out.sigma[k] = norms[j] * scale;
    out.v.col(k) = v.col(j);
    if (norms[j] > 0.0) {
      out.u.col(k) = u.col(j) / norms[j];
    } else {
      out.u.col(k).setZero();
      missing[k] = true;
    }
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end()) complete_basis(out.u, missing);
  return out;
}

}  // namespace

bool all_finite(const DenseMatrix& a) { return a.allFinite(); }

SvdResult svd(const DenseMatrix& a, double tol) {
  if (a.size() == 0) throw InvalidArgument("svd: empty matrix");
  if (!a.allFinite()) throw InvalidArgument("svd: non-finite entry");
  if (a.rows() >= a.cols()) return svd_tall(a, tol);
  SvdResult t = svd_tall(a.transpose(), tol);
  std::swap(t.u, t.v);
  return t;
}

double rank_tolerance(const SvdResult& s) {
  if (s.sigma.size() == 0) return 0.0;
  const double dim = static_cast<double>(std::max(s.u.rows(), s.v.rows()));
  return dim * std::numeric_limits<double>::epsilon() * s.sigma[0];
}

DenseMatrix matrix_sign(const DenseMatrix& a, const SignMethod& method) {
  if (!a.allFinite()) throw InvalidArgument("matrix_sign: non-finite entry");
  if (std::holds_alternative<ExactSign>(method)) {
    if (a.size() == 0) return a;
    const SvdResult s = svd(a);
    const double thr = rank_tolerance(s);
    Eigen::Index r = 0;
    while (r < s.sigma.size() && s.sigma[r] > thr) ++r;
    return s.u.leftCols(r) * s.v.leftCols(r).transpose();
  }

  const auto& ns = std::get<NewtonSchulz>(method);
  if (ns.iterations < 0) throw InvalidArgument("matrix_sign: negative iteration count");
  const double fro = a.norm();
  if (fro == 0.0) throw InvalidArgument("matrix_sign: Newton-Schulz on a zero matrix");
  const bool transposed = a.rows() > a.cols();
  DenseMatrix x = transposed ? DenseMatrix(a.transpose() / fro) : DenseMatrix(a / fro);
  const auto [ca, cb, cc] = ns.coeffs;
  for (int it = 0; it < ns.iterations; ++it) {
    const DenseMatrix g = x * x.transpose();
    const DenseMatrix poly = cb * g + cc * (g * g);
    x = ca * x + poly * x;
  }
  if (transposed) x.transposeInPlace();
  return x;
}

double max_norm(const DenseMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double spectral_norm(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return svd(a).sigma[0];
}

}  // namespace amem
