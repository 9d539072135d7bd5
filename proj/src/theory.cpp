// SPDX-License-Identifier: Apache-2.0
#include "amem/theory.hpp"

#include <cmath>
#include <limits>

#include "amem/errors.hpp"

namespace amem {
namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in [0, 1)");
}

}  // namespace

TheoryPrediction margin_fixed_point(int K, double alpha) {
  check_alpha(alpha);
  if (K < 2) throw InvalidArgument("margin_fixed_point: K must be at least 2");
  TheoryPrediction p;
  p.kind = "margin_fixed_point";
  if (alpha == 0.0) {
    p.divergent = true;
    p.value = p.lo = p.hi = std::numeric_limits<double>::infinity();
    p.caveats.push_back("noiseless: margin grows without bound");
    return p;
  }
  p.value = p.lo = p.hi = std::log(K * (1.0 - alpha + alpha / K) / alpha);
  return p;
}

double gd_margin_step(double delta, double eta, double p, int K, double alpha) {
  // K / (e^d + K - 1) rewritten to stay finite for large d.
  const double frac = delta > 0.0 ? K * std::exp(-delta) / (1.0 + (K - 1.0) * std::exp(-delta))
                                  : K / (std::exp(delta) + K - 1.0);
  return delta + eta * p * frac - alpha * eta * p;
}

double margin_subtask_loss(double delta, int K, double alpha) {
  // -log q+ = log(1 + (K-1) e^-delta), -log q0 = delta + log(1 + (K-1) e^-delta), written stably.
  const double lse = delta > 0.0 ? std::log1p((K - 1.0) * std::exp(-delta))
                                 : -delta + std::log(std::exp(delta) + K - 1.0);
  const double pc = 1.0 - alpha + alpha / K;
  const double pw = alpha / K;
  return pc * lse + (K - 1.0) * pw * (lse + delta);
}

double gd_stability_threshold(int K, double alpha) {
  check_alpha(alpha);
  if (alpha == 0.0) throw InvalidArgument("gd_stability_threshold: undefined for alpha = 0 (divergent)");
  return 2.0 / (alpha * (1.0 - alpha + alpha / K));
}

TheoryPrediction noiseless_gd_subtask(double p, double t) {
  if (!(p > 0.0) || !(t > 0.0)) throw InvalidArgument("noiseless_gd_subtask: need p > 0, t > 0");
  TheoryPrediction out;
  out.kind = "noiseless_gd_subtask";
  out.value = out.lo = out.hi = 1.0 / (p * t);
  out.caveats = {"valid for t >> 1", "up to constants"};
  return out;
}

TheoryPrediction noiseless_gd_total(int K, double t) {
  if (K < 1 || !(t > 0.0)) throw InvalidArgument("noiseless_gd_total: need K >= 1, t > 0");
  TheoryPrediction out;
  out.kind = "noiseless_gd_total";
  out.value = out.lo = out.hi = K / t;
  out.caveats = {"valid for t >> 1", "up to constants"};
  return out;
}

TheoryPrediction noiseless_muon_total(int K, int M, double eta, double t) {
  if (K < 1 || M < 1 || !(eta > 0.0) || !(t > 0.0)) throw InvalidArgument("noiseless_muon_total: bad arguments");
  const double band = 3.0 * M * M / static_cast<double>(K);
  TheoryPrediction out;
  out.kind = "noiseless_muon_total";
  out.value = K * std::exp(-eta * t);
  out.lo = K * std::exp(-eta * t * (1.0 + band));
  out.hi = K * std::exp(-eta * t * (1.0 - band));
  out.caveats = {"valid for t >> 1", "requires M^2 << K"};
  return out;
}

TheoryPrediction muon_phase_window(double eta, int K, int M, int C, double alpha) {
  check_alpha(alpha);
  if (!(eta > 0.0)) throw InvalidArgument("muon_phase_window: eta must be positive");
  if (!(alpha > 0.0)) throw InvalidArgument("muon_phase_window: requires alpha > 0");
  if (C <= 2 * M + 1) throw InvalidArgument("phase window undefined: assumption M << C violated");
  const double l = std::log((1.0 - alpha) * (K - 1.0) / alpha);
  TheoryPrediction p;
  p.kind = "muon_phase_window";
  p.lo = l / (eta * (1.0 + (2.0 * M - 1.0) / C));
  p.hi = l / (eta * (1.0 - (2.0 * M + 1.0) / C));
  p.value = 0.5 * (p.lo + p.hi);
  p.caveats = {"requires M << C"};
  return p;
}

double muon_budget_lr(long T, int K, int M, int C, double alpha) {
  check_alpha(alpha);
  if (T < 1) throw InvalidArgument("muon_budget_lr: T must be at least 1");
  if (!(alpha > 0.0)) throw InvalidArgument("muon_budget_lr: requires alpha > 0");
  if (C <= 2 * M + 1) throw InvalidArgument("muon_budget_lr: assumption M << C violated");
  return std::log((1.0 - alpha) * K / alpha) / ((1.0 - (2.0 * M + 1.0) / C) * static_cast<double>(T));
}

ScalingExponents scaling_exponents(double beta) {
  if (!(beta > 1.0)) throw InvalidArgument("scaling_exponents: beta must exceed 1");
  return {1.0 - 1.0 / beta, 2.0};
}

}  // namespace amem
