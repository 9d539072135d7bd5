// SPDX-License-Identifier: Apache-2.0
#include "amem/memory_model.hpp"

#include <cmath>
#include <random>

#include "amem/errors.hpp"

namespace amem {

KnowledgeSpec build_spec(int M, int C, const Spectrum& spectrum, double alpha) {
  if (M < 1 || C < 1) throw InvalidArgument("build_spec: M and C must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("build_spec: alpha must lie in [0, 1)");

  KnowledgeSpec spec;
  spec.M = M;
  spec.C = C;
  spec.alpha = alpha;

  if (const auto* ex = std::get_if<ExplicitSpectrum>(&spectrum)) {
    if (static_cast<int>(ex->freqs.size()) != M)
      throw InvalidArgument("build_spec: expected " + std::to_string(M) + " frequencies");
    double sum = 0.0;
    for (size_t i = 0; i < ex->freqs.size(); ++i) {
      const double f = ex->freqs[i];
      if (!(f > 0.0) || !std::isfinite(f)) throw InvalidArgument("build_spec: frequencies must be positive");
      // Ties are allowed; the reference experiments use equal middle groups.
      if (i > 0 && f > ex->freqs[i - 1]) throw InvalidArgument("build_spec: frequencies must be non-increasing");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InvalidArgument("build_spec: frequencies must sum to 1");
    spec.group_freq = ex->freqs;
    for (double& f : spec.group_freq) f /= sum;
  } else {
    const double beta = std::get<PowerLawSpectrum>(spectrum).beta;
    if (!(beta > 1.0) || !std::isfinite(beta)) throw InvalidArgument("build_spec: power-law exponent must exceed 1");
    spec.group_freq.resize(static_cast<size_t>(M));
    double z = 0.0;
    for (int i = 0; i < M; ++i) z += std::pow(i + 1.0, -beta);
    for (int i = 0; i < M; ++i) spec.group_freq[static_cast<size_t>(i)] = std::pow(i + 1.0, -beta) / z;
  }
  return spec;
}

namespace {

DenseMatrix haar_orthogonal(int K, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix g(K, K);
  for (Eigen::Index c = 0; c < K; ++c)
    for (Eigen::Index r = 0; r < K; ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<DenseMatrix> qr(g);
  DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(K, K);
  const DenseMatrix& rmat = qr.matrixQR();
  for (Eigen::Index c = 0; c < K; ++c)
    if (rmat(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

}  // namespace

EmbeddingBasis random_basis(int K, std::uint64_t seed) {
  if (K < 1) throw InvalidArgument("random_basis: K must be positive");
  std::mt19937_64 rng(seed);
  EmbeddingBasis b;
  b.e = haar_orthogonal(K, rng);
  b.e_tilde = haar_orthogonal(K, rng);
  return b;
}

EmbeddingBasis identity_basis(int K) {
  if (K < 1) throw InvalidArgument("identity_basis: K must be positive");
  return {DenseMatrix::Identity(K, K), DenseMatrix::Identity(K, K)};
}

MemoryState zero_state(int K) { return {DenseMatrix::Zero(K, K), 0}; }

DenseMatrix rotate(const DenseMatrix& w, const EmbeddingBasis& basis) {
  return basis.e_tilde.transpose() * w * basis.e;
}

DenseMatrix unrotate(const DenseMatrix& w_hat, const EmbeddingBasis& basis) {
  return basis.e_tilde * w_hat * basis.e.transpose();
}

ProbabilityTable predict_rotated(const DenseMatrix& w_hat, const KnowledgeSpec& spec) {
  const int K = spec.K();
  if (w_hat.rows() != K || w_hat.cols() != K) throw InvalidArgument("predict: weight shape does not match K");
  ProbabilityTable t;
  t.cond.resize(K, K);
  t.joint.resize(K, K);
  for (int j = 0; j < K; ++j) {
    const auto z = w_hat.col(j);
    const double m = z.maxCoeff();
    double s = 0.0;
    for (int i = 0; i < K; ++i) s += std::exp(z[i] - m);
    for (int i = 0; i < K; ++i) {
      t.cond(i, j) = std::exp(z[i] - m) / s;
      t.joint(i, j) = spec.item_freq(j) * t.cond(i, j);
    }
  }
  return t;
}

ProbabilityTable predict(const MemoryState& state, const EmbeddingBasis& basis, const KnowledgeSpec& spec) {
  return predict_rotated(rotate(state.w, basis), spec);
}

DenseMatrix target_joint(const KnowledgeSpec& spec) {
  const int K = spec.K();
  DenseMatrix p(K, K);
  for (int j = 0; j < K; ++j) {
    const double pj = spec.item_freq(j);
    for (int i = 0; i < K; ++i) p(i, j) = pj * (i == j ? spec.p_correct() : spec.p_wrong());
  }
  return p;
}

LossGradient loss_and_gradient_rotated(const DenseMatrix& w_hat, const KnowledgeSpec& spec) {
  const int K = spec.K();
  if (w_hat.rows() != K || w_hat.cols() != K) throw InvalidArgument("loss: weight shape does not match K");
  const double pc = spec.p_correct();
  const double pw = spec.p_wrong();
  LossGradient out;
  out.subtask_loss.resize(K);
  out.grad_rotated.resize(K, K);
  Vector e(K);
  for (int j = 0; j < K; ++j) {
    const auto z = w_hat.col(j);
    Eigen::Index imax = 0;
    const double m = z.maxCoeff(&imax);
    double rest = 0.0;  // sum of exp(z_i - m) over i != imax
    for (int i = 0; i < K; ++i) {
      e[i] = std::exp(z[i] - m);
      if (i != imax) rest += e[i];
    }
    const double lse = m + std::log1p(rest);
    const double s = 1.0 + rest;

    double lj = 0.0;
    for (int i = 0; i < K; ++i) lj += (i == j ? pc : pw) * (lse - z[i]);
    out.subtask_loss[j] = lj;

    // Gradient column: p_j (p^ - p). The diagonal uses the zero column sum,
    // which avoids cancellation in 1 - p^(j|j).
    const double pj = spec.item_freq(j);
    double off_sum = 0.0;
    for (int i = 0; i < K; ++i) {
      if (i == j) continue;
      const double g = pj * (e[i] / s - pw);
      out.grad_rotated(i, j) = g;
      off_sum += g;
    }
    out.grad_rotated(j, j) = -off_sum;
  }
  double total = 0.0;
  for (int j = 0; j < K; ++j) total += spec.item_freq(j) * out.subtask_loss[j];
  out.loss = total;
  if (!std::isfinite(out.loss) || !out.grad_rotated.allFinite())
    throw NumericalError("loss_and_gradient: non-finite value", -1);
  return out;
}

LossGradient loss_and_gradient(const MemoryState& state, const EmbeddingBasis& basis,
                               const KnowledgeSpec& spec) {
  LossGradient out = loss_and_gradient_rotated(rotate(state.w, basis), spec);
  out.grad_raw = unrotate(out.grad_rotated, basis);
  return out;
}

double loss(const MemoryState& state, const EmbeddingBasis& basis, const KnowledgeSpec& spec) {
  return loss_and_gradient_rotated(rotate(state.w, basis), spec).loss;
}

Vector group_losses(const Vector& subtask_loss, const KnowledgeSpec& spec) {
  Vector g = Vector::Zero(spec.M);
  for (int j = 0; j < spec.K(); ++j) g[spec.group_of(j)] += subtask_loss[j];
  return g / spec.C;
}

double optimal_loss(double alpha, int K) {
  if (!(alpha >= 0.0 && alpha < 1.0) || K < 1) throw InvalidArgument("optimal_loss: need alpha in [0, 1), K >= 1");
  const double pc = 1.0 - alpha + alpha / K;
  const double pw = alpha / K;
  double l = -pc * std::log(pc);
  if (pw > 0.0) l -= (K - 1) * pw * std::log(pw);
  return l;
}

DenseMatrix hessian_block(const MemoryState& state, const EmbeddingBasis& basis,
                          const KnowledgeSpec& spec, int j) {
  if (j < 0 || j >= spec.K()) throw InvalidArgument("hessian_block: column index out of range");
  const ProbabilityTable t = predict(state, basis, spec);
  const Vector q = t.cond.col(j);
  DenseMatrix h = -q * q.transpose();
  h.diagonal() += q;
  return spec.item_freq(j) * h;
}

}  // namespace amem
