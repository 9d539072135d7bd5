// SPDX-License-Identifier: Apache-2.0
#include "amem/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "amem/block_dynamics.hpp"
#include "amem/errors.hpp"

namespace amem {

std::string to_string(Engine e) {
  switch (e) {
    case Engine::Auto: return "auto";
    case Engine::Dense: return "dense";
    case Engine::Block: return "block";
  }
  return "auto";
}

Engine parse_engine(const std::string& name) {
  if (name == "auto") return Engine::Auto;
  if (name == "dense") return Engine::Dense;
  if (name == "block") return Engine::Block;
  throw InvalidArgument("unknown engine '" + name + "'");
}

void validate(const RunConfig& cfg) {
  if (cfg.steps < 0) throw InvalidArgument("steps must be >= 0");
  if (cfg.record_every < 1) throw InvalidArgument("record_every must be >= 1");
  if (!(cfg.opt.eta > 0.0) || !std::isfinite(cfg.opt.eta)) throw InvalidArgument("eta must be positive and finite");
  if (cfg.spec.K() < 1 || static_cast<int>(cfg.spec.group_freq.size()) != cfg.spec.M)
    throw InvalidArgument("invalid knowledge spec");
  if (const auto* ns = std::get_if<NewtonSchulz>(&cfg.opt.sign_method); ns && ns->iterations < 1)
    throw InvalidArgument("newton_schulz iterations must be >= 1");
  if (cfg.engine == Engine::Block && !block_supported(cfg.opt))
    throw InvalidArgument("block engine supports gd, muon with exact sign, and tra-signgd only");
}

Engine resolve_engine(const RunConfig& cfg) {
  if (cfg.engine != Engine::Auto) return cfg.engine;
  return block_supported(cfg.opt) && cfg.spec.K() >= kAutoBlockThreshold ? Engine::Block : Engine::Dense;
}

std::string fingerprint(const RunConfig& cfg) {
  std::string s;
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g,", x);
    s += buf;
  };
  num(cfg.spec.M);
  num(cfg.spec.C);
  num(cfg.spec.alpha);
  for (double f : cfg.spec.group_freq) num(f);
  s += to_string(cfg.opt.kind) + ",";
  num(cfg.opt.eta);
  if (const auto* ns = std::get_if<NewtonSchulz>(&cfg.opt.sign_method)) {
    s += "ns,";
    num(ns->iterations);
    for (double c : ns->coeffs) num(c);
  } else {
    s += "exact,";
  }
  num(static_cast<double>(cfg.steps));
  num(static_cast<double>(cfg.record_every));
  s += std::to_string(cfg.seed) + "," + to_string(resolve_engine(cfg)) + (cfg.identity_basis ? ",id" : ",rand");

  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

bool should_record(long t, const RunConfig& cfg) { return t % cfg.record_every == 0 || t == cfg.steps; }

Trajectory run_dense(const RunConfig& cfg, const Probes& probes) {
  const KnowledgeSpec& spec = cfg.spec;
  const int K = spec.K();
  const int C = spec.C;
  const double l_star = optimal_loss(spec.alpha, K);
  const EmbeddingBasis basis = cfg.identity_basis ? identity_basis(K) : random_basis(K, cfg.seed);

  Trajectory traj;
  traj.fingerprint = fingerprint(cfg);
  traj.onset_first.assign(static_cast<size_t>(spec.M), -1);
  traj.onset_last.assign(static_cast<size_t>(spec.M), -1);
  std::vector<long> item_onset(static_cast<size_t>(K), -1);
  MemoryState state = zero_state(K);

  for (long t = 0;; ++t) {
    const DenseMatrix w_hat = rotate(state.w, basis);
    LossGradient lg;
    try {
      lg = loss_and_gradient_rotated(w_hat, spec);
    } catch (const NumericalError&) {
      throw NumericalError("non-finite gradient", t);
    }
    const ProbabilityTable table = predict_rotated(w_hat, spec);

    for (int j = 0; j < K; ++j) {
      if (item_onset[j] >= 0 || C < 2) continue;
      const int J = spec.group_of(j);
      double lo = 1.0;
      for (int i = J * C; i < (J + 1) * C; ++i)
        if (i != j) lo = std::min(lo, table.cond(i, j));
      if (table.cond(j, j) - lo >= 1.0 - spec.alpha) {
        item_onset[j] = t;
        if (traj.onset_first[J] < 0) traj.onset_first[J] = t;
        if (std::all_of(item_onset.begin() + J * C, item_onset.begin() + (J + 1) * C, [](long x) { return x >= 0; }))
          traj.onset_last[J] = t;
      }
    }

    if (should_record(t, cfg)) {
      TrajectoryRecord rec;
      rec.step = t;
      rec.total_loss = lg.loss;
      rec.excess_risk = lg.loss - l_star;
      const Vector gl = group_losses(lg.subtask_loss, spec);
      rec.group_losses.assign(gl.data(), gl.data() + gl.size());
      const Vector diag = table.cond.diagonal();
      rec.delta_gap = diag.maxCoeff() - diag.minCoeff();
      if (probes.msgn_deviation) {
        DenseMatrix dev = matrix_sign(-lg.grad_rotated);
        dev.diagonal().array() -= 1.0;
        rec.msgn_inf_dev = max_norm(dev);
      }
      if (probes.weight_structure)
        rec.structure_dev = cfg.opt.kind == OptimizerKind::GD ? column_symmetry_deviation(w_hat)
                                                                 : block_structure_deviation(w_hat, spec.M, C);
      traj.records.push_back(std::move(rec));
    }
    if (t == cfg.steps) break;

    if (cfg.opt.kind != OptimizerKind::TraSignGD) lg.grad_raw = unrotate(lg.grad_rotated, basis);
    apply_update(state, cfg.opt, basis, lg);
  }
  return traj;
}

Trajectory run_block(const RunConfig& cfg, const Probes& probes) {
  const KnowledgeSpec& spec = cfg.spec;
  const int M = spec.M;
  const int C = spec.C;
  const double l_star = optimal_loss(spec.alpha, spec.K());

  Trajectory traj;
  traj.fingerprint = fingerprint(cfg);
  traj.onset_first.assign(static_cast<size_t>(M), -1);
  traj.onset_last.assign(static_cast<size_t>(M), -1);
  BlockState state = zero_block_state(M);

  for (long t = 0;; ++t) {
    const BlockEval ev = evaluate(state, spec);

    for (int J = 0; J < M && C >= 2; ++J) {
      if (traj.onset_first[J] >= 0) continue;
      if (ev.q_diag[J] - ev.q_in[J] >= 1.0 - spec.alpha) traj.onset_first[J] = traj.onset_last[J] = t;
    }

    if (should_record(t, cfg)) {
      TrajectoryRecord rec;
      rec.step = t;
      rec.total_loss = ev.loss;
      rec.excess_risk = ev.loss - l_star;
      rec.group_losses.assign(ev.group_loss.data(), ev.group_loss.data() + M);
      rec.delta_gap = ev.q_diag.maxCoeff() - ev.q_diag.minCoeff();
      if (probes.msgn_deviation) rec.msgn_inf_dev = block_msgn_deviation(block_matrix_sign(ev, spec), spec);
      if (probes.weight_structure) {
        // Block form holds by construction; GD additionally needs one
        // off-diagonal value per column.
        double dev = 0.0;
        if (cfg.opt.kind == OptimizerKind::GD) {
          for (int J = 0; J < M; ++J) {
            double lo = C > 1 ? state.mu[J] : INFINITY, hi = C > 1 ? state.mu[J] : -INFINITY;
            for (int I = 0; I < M; ++I) {
              if (I == J) continue;
              lo = std::min(lo, state.gamma(I, J));
              hi = std::max(hi, state.gamma(I, J));
            }
            if (hi >= lo) dev = std::max(dev, hi - lo);
          }
        }
        rec.structure_dev = dev;
      }
      traj.records.push_back(std::move(rec));
    }
    if (t == cfg.steps) break;
    block_apply(state, cfg.opt, spec, ev);
  }
  return traj;
}

}  // namespace

Trajectory run(const RunConfig& cfg, const Probes& probes) {
  validate(cfg);
  return resolve_engine(cfg) == Engine::Block ? run_block(cfg, probes) : run_dense(cfg, probes);
}

}  // namespace amem
