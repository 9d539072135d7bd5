// SPDX-License-Identifier: Apache-2.0
#include "amem/block_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amem/errors.hpp"

namespace amem {
namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

BlockState zero_block_state(int M) {
  return {Vector::Zero(M), Vector::Zero(M), DenseMatrix::Zero(M, M), 0};
}

bool block_supported(const OptimizerConfig& opt) {
  switch (opt.kind) {
    case OptimizerKind::GD:
    case OptimizerKind::TraSignGD:
      return true;
    case OptimizerKind::Muon:
      return std::holds_alternative<ExactSign>(opt.sign_method);
    case OptimizerKind::SignGD:
      return false;
  }
  return false;
}

DenseMatrix expand(const BlockState& s, const KnowledgeSpec& spec) {
  const int K = spec.K();
  DenseMatrix w(K, K);
  for (int j = 0; j < K; ++j) {
    const int J = spec.group_of(j);
    for (int i = 0; i < K; ++i) {
      const int I = spec.group_of(i);
      w(i, j) = I != J ? s.gamma(I, J) : (i == j ? s.omega[J] : s.mu[J]);
    }
  }
  return w;
}

double block_structure_deviation(const DenseMatrix& w_hat, int M, int C) {
  double dev = 0.0;
  for (int J = 0; J < M; ++J) {
    for (int I = 0; I < M; ++I) {
      double dlo = std::numeric_limits<double>::infinity(), dhi = -dlo;
      double olo = dlo, ohi = -dlo;
      for (int c = 0; c < C; ++c) {
        for (int r = 0; r < C; ++r) {
          const double x = w_hat(I * C + r, J * C + c);
          if (I == J && r == c) {
            dlo = std::min(dlo, x);
            dhi = std::max(dhi, x);
          } else {
            olo = std::min(olo, x);
            ohi = std::max(ohi, x);
          }
        }
      }
      if (dhi >= dlo) dev = std::max(dev, dhi - dlo);
      if (ohi >= olo) dev = std::max(dev, ohi - olo);
    }
  }
  return dev;
}

double column_symmetry_deviation(const DenseMatrix& w_hat) {
  double dev = 0.0;
  for (Eigen::Index j = 0; j < w_hat.cols(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < w_hat.rows(); ++i) {
      if (i == j) continue;
      lo = std::min(lo, w_hat(i, j));
      hi = std::max(hi, w_hat(i, j));
    }
    if (hi >= lo) dev = std::max(dev, hi - lo);
  }
  return dev;
}

BlockEval evaluate(const BlockState& s, const KnowledgeSpec& spec) {
  const int M = spec.M;
  const int C = spec.C;
  const double pc = spec.p_correct();
  const double pw = spec.p_wrong();
  BlockEval ev;
  ev.q_diag.resize(M);
  ev.q_in.resize(M);
  ev.q_out = DenseMatrix::Zero(M, M);
  ev.group_loss.resize(M);
  ev.r_diag.resize(M);
  ev.r_in.resize(M);
  ev.r_out = DenseMatrix::Zero(M, M);

  for (int J = 0; J < M; ++J) {
    // Column logits as (value, multiplicity) pairs.
    double m = s.omega[J];
    if (C > 1) m = std::max(m, s.mu[J]);
    for (int I = 0; I < M; ++I)
      if (I != J) m = std::max(m, s.gamma(I, J));

    // Sum of exp(z - m) over all entries except one instance of the max.
    double rest = 0.0;
    bool max_taken = false;
    auto add = [&](double v, double mult) {
      if (mult <= 0.0) return;
      if (!max_taken && v == m) {
        max_taken = true;
        mult -= 1.0;
      }
      rest += mult * std::exp(v - m);
    };
    add(s.omega[J], 1.0);
    add(s.mu[J], C - 1.0);
    for (int I = 0; I < M; ++I)
      if (I != J) add(s.gamma(I, J), C);
    const double lse = m + std::log1p(rest);

    ev.q_diag[J] = std::exp(s.omega[J] - lse);
    ev.q_in[J] = C > 1 ? std::exp(s.mu[J] - lse) : 0.0;
    double out_loss = 0.0;
    for (int I = 0; I < M; ++I) {
      if (I == J) continue;
      ev.q_out(I, J) = std::exp(s.gamma(I, J) - lse);
      out_loss += lse - s.gamma(I, J);
    }
    ev.group_loss[J] = pc * (lse - s.omega[J]) + pw * ((C - 1.0) * (lse - s.mu[J]) + C * out_loss);

    const double pj = spec.group_freq[static_cast<size_t>(J)] / C;
    ev.r_in[J] = C > 1 ? pj * (pw - ev.q_in[J]) : 0.0;
    double col = (C - 1.0) * ev.r_in[J];
    for (int I = 0; I < M; ++I) {
      if (I == J) continue;
      ev.r_out(I, J) = pj * (pw - ev.q_out(I, J));
      col += C * ev.r_out(I, J);
    }
    ev.r_diag[J] = -col;
  }
  double total = 0.0;
  for (int J = 0; J < M; ++J) total += spec.group_freq[static_cast<size_t>(J)] * ev.group_loss[J];
  ev.loss = total;
  if (!std::isfinite(ev.loss) || !ev.r_diag.allFinite() || !ev.r_out.allFinite())
    throw NumericalError("block evaluation produced a non-finite value", s.step);
  return ev;
}

BlockSign block_matrix_sign(const BlockEval& ev, const KnowledgeSpec& spec) {
  const int M = spec.M;
  const int C = spec.C;
  Vector a = ev.r_diag - ev.r_in;
  DenseMatrix q = C * ev.r_out;
  for (int J = 0; J < M; ++J) q(J, J) = ev.r_diag[J] + (C - 1.0) * ev.r_in[J];

  // Same zero threshold as the dense path: K * eps * sigma_max(R).
  const SvdResult sv = svd(q);
  double smax = sv.sigma[0];
  if (C > 1) smax = std::max(smax, a.cwiseAbs().maxCoeff());
  const double thr = spec.K() * std::numeric_limits<double>::epsilon() * smax;

  BlockSign bs;
  bs.diag_sign = Vector::Zero(M);
  if (C > 1)
    for (int J = 0; J < M; ++J) bs.diag_sign[J] = std::abs(a[J]) > thr ? sgn(a[J]) : 0.0;
  Eigen::Index r = 0;
  while (r < sv.sigma.size() && sv.sigma[r] > thr) ++r;
  bs.core = sv.u.leftCols(r) * sv.v.leftCols(r).transpose();
  return bs;
}

DenseMatrix expand_sign(const BlockSign& bs, const KnowledgeSpec& spec) {
  const int K = spec.K();
  const int C = spec.C;
  DenseMatrix out(K, K);
  for (int j = 0; j < K; ++j) {
    const int J = spec.group_of(j);
    for (int i = 0; i < K; ++i) {
      const int I = spec.group_of(i);
      double v = bs.core(I, J) / C;
      if (I == J) v += bs.diag_sign[J] * ((i == j ? 1.0 : 0.0) - 1.0 / C);
      out(i, j) = v;
    }
  }
  return out;
}

double block_msgn_deviation(const BlockSign& bs, const KnowledgeSpec& spec) {
  const int M = spec.M;
  const double C = spec.C;
  double dev = 0.0;
  for (int J = 0; J < M; ++J) {
    for (int I = 0; I < M; ++I) {
      if (I == J) {
        const double d = bs.diag_sign[J] * (1.0 - 1.0 / C) + bs.core(J, J) / C - 1.0;
        dev = std::max(dev, std::abs(d));
        if (spec.C > 1) dev = std::max(dev, std::abs(-bs.diag_sign[J] / C + bs.core(J, J) / C));
      } else {
        dev = std::max(dev, std::abs(bs.core(I, J) / C));
      }
    }
  }
  return dev;
}

void block_apply(BlockState& s, const OptimizerConfig& opt, const KnowledgeSpec& spec, const BlockEval& ev) {
  if (!(opt.eta > 0.0)) throw InvalidArgument("optimizer: learning rate must be positive");
  if (!block_supported(opt))
    throw InvalidArgument("block engine supports gd, muon with exact sign, and tra-signgd only");
  const int M = spec.M;
  const double C = spec.C;
  const double eta = opt.eta;
  switch (opt.kind) {
    case OptimizerKind::GD:
      s.omega += eta * ev.r_diag;
      s.mu += eta * ev.r_in;
      s.gamma += eta * ev.r_out;
      break;
    case OptimizerKind::TraSignGD:
      for (int J = 0; J < M; ++J) {
        s.omega[J] += eta * sgn(ev.r_diag[J]);
        s.mu[J] += eta * sgn(ev.r_in[J]);
        for (int I = 0; I < M; ++I)
          if (I != J) s.gamma(I, J) += eta * sgn(ev.r_out(I, J));
      }
      break;
    case OptimizerKind::Muon: {
      const BlockSign bs = block_matrix_sign(ev, spec);
      for (int J = 0; J < M; ++J) {
        s.omega[J] += eta * (bs.diag_sign[J] * (1.0 - 1.0 / C) + bs.core(J, J) / C);
        s.mu[J] += eta * (-bs.diag_sign[J] / C + bs.core(J, J) / C);
        for (int I = 0; I < M; ++I)
          if (I != J) s.gamma(I, J) += eta * bs.core(I, J) / C;
      }
      break;
    }
    case OptimizerKind::SignGD:
      break;
  }
  ++s.step;
  if (!s.omega.allFinite() || !s.mu.allFinite() || !s.gamma.allFinite())
    throw NumericalError("non-finite weights after update", s.step);
}

void block_step(BlockState& s, const OptimizerConfig& opt, const KnowledgeSpec& spec) {
  block_apply(s, opt, spec, evaluate(s, spec));
}

}  // namespace amem
