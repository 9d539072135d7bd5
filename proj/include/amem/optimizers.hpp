// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "amem/linalg.hpp"
#include "amem/memory_model.hpp"

namespace amem {

enum class OptimizerKind { GD, Muon, SignGD, TraSignGD };

std::string to_string(OptimizerKind kind);
// Accepts "gd", "muon", "signgd", "tra-signgd". Throws InvalidArgument otherwise.
OptimizerKind parse_optimizer(const std::string& name);

// Zero momentum, zero weight decay, constant learning rate.
struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::GD;
  double eta = 1.0;
  SignMethod sign_method = ExactSign{};
};

// Applies one update in place and increments state.step.
//   GD:         W <- W - eta grad
//   Muon:       W <- W - eta msgn(grad)
//   SignGD:     W <- W - eta sgn(grad)            (entrywise, raw basis)
//   TraSignGD:  W^ <- W^ - eta sgn(grad^)         (entrywise, rotated basis)
// Throws NumericalError if the gradient or the new weights are non-finite.
void step(MemoryState& state, const OptimizerConfig& opt, const EmbeddingBasis& basis,
          const KnowledgeSpec& spec);

// Same update driven by a precomputed gradient.
void apply_update(MemoryState& state, const OptimizerConfig& opt, const EmbeddingBasis& basis,
                  const LossGradient& lg);

}  // namespace amem
