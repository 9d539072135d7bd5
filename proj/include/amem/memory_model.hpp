// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "amem/linalg.hpp"

namespace amem {

struct ExplicitSpectrum {
  std::vector<double> freqs;
};

// p~_i proportional to i^-beta, i = 1..M.
struct PowerLawSpectrum {
  double beta;
};

using Spectrum = std::variant<ExplicitSpectrum, PowerLawSpectrum>;

// M groups of C items each; item j belongs to group j / C.
struct KnowledgeSpec {
  int M = 0;
  int C = 0;
  std::vector<double> group_freq;  // p~, non-increasing, sums to 1
  double alpha = 0.0;              // label-noise level in [0, 1)

  int K() const { return M * C; }
  int group_of(int item) const { return item / C; }
  double item_freq(int item) const { return group_freq[static_cast<size_t>(group_of(item))] / C; }
  double p_correct() const { return 1.0 - alpha + alpha / K(); }
  double p_wrong() const { return alpha / K(); }
};

KnowledgeSpec build_spec(int M, int C, const Spectrum& spectrum, double alpha);

// Orthonormal input embedding E and output embedding E~ (columns are embeddings).
struct EmbeddingBasis {
  DenseMatrix e;
  DenseMatrix e_tilde;
};

// Haar-random orthonormal pair from a seeded Gaussian QR.
EmbeddingBasis random_basis(int K, std::uint64_t seed);
EmbeddingBasis identity_basis(int K);

struct MemoryState {
  DenseMatrix w;
  long step = 0;
};

MemoryState zero_state(int K);

// W^ = E~^T W E and its inverse.
DenseMatrix rotate(const DenseMatrix& w, const EmbeddingBasis& basis);
DenseMatrix unrotate(const DenseMatrix& w_hat, const EmbeddingBasis& basis);

// cond(i, j) = p^(i | j); joint(i, j) = p_j p^(i | j).
struct ProbabilityTable {
  DenseMatrix cond;
  DenseMatrix joint;
};

ProbabilityTable predict_rotated(const DenseMatrix& w_hat, const KnowledgeSpec& spec);
ProbabilityTable predict(const MemoryState& state, const EmbeddingBasis& basis, const KnowledgeSpec& spec);

// Target joint P'(i, j) = p_j p(i | j).
DenseMatrix target_joint(const KnowledgeSpec& spec);

struct LossGradient {
  double loss = 0.0;
  Vector subtask_loss;  // L_j per item
  DenseMatrix grad_rotated;
  DenseMatrix grad_raw;
};

// Evaluates everything in the rotated frame. grad_raw is filled only when requested.
LossGradient loss_and_gradient_rotated(const DenseMatrix& w_hat, const KnowledgeSpec& spec);
LossGradient loss_and_gradient(const MemoryState& state, const EmbeddingBasis& basis,
                               const KnowledgeSpec& spec);

double loss(const MemoryState& state, const EmbeddingBasis& basis, const KnowledgeSpec& spec);

// Mean sub-task loss over the items of each group.
Vector group_losses(const Vector& subtask_loss, const KnowledgeSpec& spec);

// Minimum achievable loss, attained when p^ equals the noisy label distribution.
double optimal_loss(double alpha, int K);

// Hessian of the loss with respect to column j of W^.
DenseMatrix hessian_block(const MemoryState& state, const EmbeddingBasis& basis,
                          const KnowledgeSpec& spec, int j);

}  // namespace amem
