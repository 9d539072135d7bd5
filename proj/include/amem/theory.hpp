// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "amem/optimizers.hpp"

namespace amem {

// A closed-form value or interval plus the caveats under which it applies.
struct TheoryPrediction {
  std::string kind;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool divergent = false;
  std::vector<std::string> caveats;
};

// ln(K (1 - alpha + alpha/K) / alpha). alpha == 0 is flagged divergent with value +inf.
TheoryPrediction margin_fixed_point(int K, double alpha);

// Delta + eta p K / (e^Delta + K - 1) - alpha eta p.
double gd_margin_step(double delta, double eta, double p, int K, double alpha);

// Sub-task loss of a column whose correct logit leads every other logit by delta.
double margin_subtask_loss(double delta, int K, double alpha);

// Supremum of eta * p for linear stability at the fixed point: 2 / (alpha (1 - alpha + alpha/K)).
// Throws InvalidArgument for alpha == 0.
double gd_stability_threshold(int K, double alpha);

// Large-t noiseless GD sub-task loss 1 / (p t).
TheoryPrediction noiseless_gd_subtask(double p, double t);
// Large-t noiseless GD total loss K / t.
TheoryPrediction noiseless_gd_total(int K, double t);
// Noiseless Muon total loss K e^(-eta t). [lo, hi] brackets the exponent by
// -eta t (1 +- 3 M^2 / K).
TheoryPrediction noiseless_muon_total(int K, int M, double eta, double t);

// [T_lo, T_hi] bracketing the oscillation onset of every sub-task.
// Throws InvalidArgument when C <= 2M + 1.
TheoryPrediction muon_phase_window(double eta, int K, int M, int C, double alpha);

// ln((1 - alpha) K / alpha) / ((1 - (2M + 1)/C) T).
double muon_budget_lr(long T, int K, int M, int C, double alpha);

struct ScalingExponents {
  double gd;
  double muon;
};

// (1 - 1/beta, 2). Throws InvalidArgument for beta <= 1.
ScalingExponents scaling_exponents(double beta);

}  // namespace amem
