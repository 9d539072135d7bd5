// SPDX-License-Identifier: Apache-2.0
#include "amem/optimizers.hpp"

#include "amem/errors.hpp"

namespace amem {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::GD: return "gd";
    case OptimizerKind::Muon: return "muon";
    case OptimizerKind::SignGD: return "signgd";
    case OptimizerKind::TraSignGD: return "tra-signgd";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "gd") return OptimizerKind::GD;
  if (name == "muon") return OptimizerKind::Muon;
  if (name == "signgd") return OptimizerKind::SignGD;
  if (name == "tra-signgd") return OptimizerKind::TraSignGD;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

namespace {

DenseMatrix entrywise_sign(const DenseMatrix& g) {
  return g.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

void apply_update(MemoryState& state, const OptimizerConfig& opt, const EmbeddingBasis& basis,
                  const LossGradient& lg) {
  if (!(opt.eta > 0.0)) throw InvalidArgument("optimizer: learning rate must be positive");
  switch (opt.kind) {
    case OptimizerKind::GD:
      state.w -= opt.eta * lg.grad_raw;
      break;
    case OptimizerKind::Muon:
      // A zero gradient has msgn = 0 under the exact method.
      if (std::holds_alternative<ExactSign>(opt.sign_method) || lg.grad_raw.norm() > 0.0)
        state.w -= opt.eta * matrix_sign(lg.grad_raw, opt.sign_method);
      break;
    case OptimizerKind::SignGD:
      state.w -= opt.eta * entrywise_sign(lg.grad_raw);
      break;
    case OptimizerKind::TraSignGD:
      state.w -= opt.eta * unrotate(entrywise_sign(lg.grad_rotated), basis);
      break;
  }
  ++state.step;
  if (!state.w.allFinite()) throw NumericalError("non-finite weights after update", state.step);
}

void step(MemoryState& state, const OptimizerConfig& opt, const EmbeddingBasis& basis,
          const KnowledgeSpec& spec) {
  LossGradient lg;
  try {
    lg = loss_and_gradient(state, basis, spec);
  } catch (const NumericalError&) {
    throw NumericalError("non-finite gradient", state.step);
  }
  apply_update(state, opt, basis, lg);
}

}  // namespace amem
