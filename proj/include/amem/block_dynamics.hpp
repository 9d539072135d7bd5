// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact reduced dynamics for rotated weights of block form
//   W^ = sum_I [ omega_I I_C + mu_I (J_C - I_C) ] on diagonal blocks,
//   W^ block (I, J) = gamma(I, J) J_C for I != J,
// where block (I, J) holds output rows of group I and input columns of group J.
// GD, exact Muon and TRA-SignGD started from zero stay in this family, so a
// K x K run reduces to O(M^2) state and an M x M SVD per step.

#include "amem/memory_model.hpp"
#include "amem/optimizers.hpp"

namespace amem {

struct BlockState {
  Vector omega;       // diagonal entries of each diagonal block
  Vector mu;          // off-diagonal entries of each diagonal block
  DenseMatrix gamma;  // off-diagonal block values; gamma(I, I) unused and kept at 0
  long step = 0;
};

BlockState zero_block_state(int M);

// Dense K x K rotated weights.
DenseMatrix expand(const BlockState& s, const KnowledgeSpec& spec);

// Largest spread of W^ entries within one structural class (the block
// diagonal, the block off-diagonal, each off-diagonal block). Zero iff W^ has block form.
double block_structure_deviation(const DenseMatrix& w_hat, int M, int C);

// Largest spread of the off-diagonal entries within a column. Zero iff every
// column has a single off-diagonal value.
double column_symmetry_deviation(const DenseMatrix& w_hat);

// Predictions, losses and the residual R = P' - P^' of a block state.
// All columns of one group share these values.
struct BlockEval {
  Vector q_diag;        // p^(j | j)
  Vector q_in;          // p^(j' | j), j' != j in the same group
  DenseMatrix q_out;    // q_out(I, J): p^(i | j), i in group I != J
  Vector group_loss;
  double loss = 0.0;
  Vector r_diag;        // R(j, j)
  Vector r_in;          // R(j', j), same group
  DenseMatrix r_out;    // r_out(I, J): R(i, j), i in group I != J
};

BlockEval evaluate(const BlockState& s, const KnowledgeSpec& spec);

// msgn(R) = sum_J sgn(a_J) (I_C - J_C / C) on block J  +  Y msgn(Q) Y^T, with
// a_J = r_diag - r_in, Q(I, J) = a_J [I == J] + C * (block value of R), Y the
// normalized block indicators.
struct BlockSign {
  Vector diag_sign;  // sgn(a_J)
  DenseMatrix core;  // msgn(Q)
};

BlockSign block_matrix_sign(const BlockEval& ev, const KnowledgeSpec& spec);

// Dense msgn(R) assembled from the block form.
DenseMatrix expand_sign(const BlockSign& bs, const KnowledgeSpec& spec);

// max_ij |msgn(R) - I|_ij.
double block_msgn_deviation(const BlockSign& bs, const KnowledgeSpec& spec);

// GD, Muon (exact sign only) and TRA-SignGD. Throws InvalidArgument for other
// optimizers and NumericalError on non-finite values.
void block_step(BlockState& s, const OptimizerConfig& opt, const KnowledgeSpec& spec);

// Same update from a precomputed evaluation.
void block_apply(BlockState& s, const OptimizerConfig& opt, const KnowledgeSpec& spec, const BlockEval& ev);

bool block_supported(const OptimizerConfig& opt);

}  // namespace amem
