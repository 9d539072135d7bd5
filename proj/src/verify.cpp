// SPDX-License-Identifier: Apache-2.0
#include "amem/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "amem/block_dynamics.hpp"
#include "amem/errors.hpp"
#include "amem/optimizers.hpp"
#include "amem/runner.hpp"
#include "amem/theory.hpp"

namespace amem {
namespace {

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, static_cast<double>(args)...);
  return buf;
}

CheckResult check(const std::string& name, bool ok, const std::string& detail) { return {name, ok, false, detail}; }

// Largest gap between a column's diagonal and its off-diagonal entries, taken
// against the largest off-diagonal so it is exact under column symmetry.
Vector dense_margins(const DenseMatrix& w_hat) {
  const Eigen::Index K = w_hat.cols();
  Vector m(K);
  for (Eigen::Index j = 0; j < K; ++j) {
    double off = -INFINITY;
    for (Eigen::Index i = 0; i < K; ++i)
      if (i != j) off = std::max(off, w_hat(i, j));
    m[j] = w_hat(j, j) - off;
  }
  return m;
}

Vector block_margins(const BlockState& s, int C) {
  const Eigen::Index M = s.omega.size();
  Vector m(M);
  for (Eigen::Index J = 0; J < M; ++J) {
    double off = C > 1 ? s.mu[J] : -INFINITY;
    for (Eigen::Index I = 0; I < M; ++I)
      if (I != J) off = std::max(off, s.gamma(I, J));
    m[J] = s.omega[J] - off;
  }
  return m;
}

std::vector<CheckResult> margin_checks(const VerifyOptions& o, const KnowledgeSpec& full, const KnowledgeSpec& small) {
  std::vector<CheckResult> out;
  // Dense GD in a random basis against the scalar recursion, per item.
  {
    const int K = small.K();
    const double eta = 0.1 / small.item_freq(0);
    const OptimizerConfig opt{OptimizerKind::GD, eta, ExactSign{}};
    const EmbeddingBasis basis = random_basis(K, o.seed);
    MemoryState st = zero_state(K);
    std::vector<double> delta(static_cast<size_t>(K), 0.0);
    double worst = 0.0;
    const int steps = 300;
    for (int t = 1; t <= steps; ++t) {
      step(st, opt, basis, small);
      for (int j = 0; j < K; ++j) delta[j] = gd_margin_step(delta[j], eta, small.item_freq(j), K, small.alpha);
      const Vector m = dense_margins(rotate(st.w, basis));
      for (int j = 0; j < K; ++j) worst = std::max(worst, std::abs(m[j] - delta[j]));
    }
    out.push_back(check("margin-oracle/dense", worst <= 1e-8,
                        fmt("K=%.0f, eta*p1=0.1, 300 steps: max |simulated - recursion| = %.3g (tol 1e-8)", K, worst)));
  }
  // Reduced dynamics at the requested K.
  {
    const double eta = 0.1 / full.item_freq(0);
    const OptimizerConfig opt{OptimizerKind::GD, eta, ExactSign{}};
    BlockState st = zero_block_state(full.M);
    std::vector<double> delta(static_cast<size_t>(full.M), 0.0);
    double worst = 0.0;
    const int steps = 2000;
    for (int t = 1; t <= steps; ++t) {
      block_step(st, opt, full);
      for (int J = 0; J < full.M; ++J)
        delta[J] = gd_margin_step(delta[J], eta, full.group_freq[J] / full.C, full.K(), full.alpha);
      const Vector m = block_margins(st, full.C);
      for (int J = 0; J < full.M; ++J) worst = std::max(worst, std::abs(m[J] - delta[J]));
    }
    out.push_back(check("margin-oracle/block", worst <= 1e-8,
                        fmt("K=%.0f, eta*p1=0.1, 2000 steps: max |simulated - recursion| = %.3g (tol 1e-8)", full.K(),
                            worst)));
  }
  return out;
}

std::vector<CheckResult> msgn_checks(const VerifyOptions& o, const KnowledgeSpec& full, const KnowledgeSpec& small) {
  std::vector<CheckResult> out;
  const Probes probes{true, false};
  auto phase1_max = [](const Trajectory& tr) {
    long onset = tr.records.back().step + 1;
    for (long f : tr.onset_first)
      if (f >= 0) onset = std::min(onset, f);
    double worst = 0.0;
    long counted = 0;
    for (const auto& r : tr.records)
      if (r.step < onset) {
        worst = std::max(worst, *r.msgn_inf_dev);
        ++counted;
      }
    return std::make_pair(worst, counted);
  };

  for (const KnowledgeSpec* spec : {&full, &small}) {
    const bool dense = spec == &small;
    const double bound = (spec->M + 1.0) / spec->C;
    RunConfig rc;
    rc.seed = o.seed;
    rc.opt = {OptimizerKind::Muon, o.eta, ExactSign{}};
    rc.steps = 30;
    rc.engine = dense ? Engine::Dense : Engine::Block;

    rc.spec = build_spec(spec->M, spec->C, ExplicitSpectrum{spec->group_freq}, 0.0);
    const Trajectory quiet = run(rc, probes);
    double worst = 0.0;
    for (const auto& r : quiet.records) worst = std::max(worst, *r.msgn_inf_dev);
    const std::string tag = dense ? "dense" : "block";
    out.push_back(check("msgn-bound/noiseless/" + tag, worst <= bound,
                        fmt("K=%.0f: max |msgn(R) - I| = %.4g over 30 steps, bound (M+1)/C = %.4g", spec->K(), worst,
                            bound)));

    rc.spec = *spec;
    rc.steps = 50;
    const Trajectory noisy = run(rc, probes);
    const auto [w, n] = phase1_max(noisy);
    out.push_back(check("msgn-bound/noisy-phase1/" + tag, n > 0 && w <= bound,
                        fmt("K=%.0f: max |msgn(R) - I| = %.4g over %.0f pre-onset steps, bound %.4g", spec->K(), w,
                            n, bound)));
  }
  return out;
}

std::vector<CheckResult> structure_checks(const VerifyOptions& o, const KnowledgeSpec& small) {
  std::vector<CheckResult> out;
  const int K = small.K();
  const EmbeddingBasis basis = random_basis(K, o.seed);
  const struct {
    OptimizerKind kind;
    double eta;
    const char* name;
  } cases[] = {{OptimizerKind::GD, 0.1 / small.item_freq(0), "structure/gd-column-symmetry"},
               {OptimizerKind::Muon, o.eta, "structure/muon-block-form"},
               {OptimizerKind::TraSignGD, o.eta, "structure/tra-signgd-block-form"}};
  for (const auto& c : cases) {
    MemoryState st = zero_state(K);
    const OptimizerConfig opt{c.kind, c.eta, ExactSign{}};
    double worst = 0.0;
    for (int t = 1; t <= 50; ++t) {
      step(st, opt, basis, small);
      const DenseMatrix w_hat = rotate(st.w, basis);
      worst = std::max(worst, c.kind == OptimizerKind::GD ? column_symmetry_deviation(w_hat)
                                                          : block_structure_deviation(w_hat, small.M, small.C));
    }
    out.push_back(check(c.name, worst <= 1e-8, fmt("K=%.0f, 50 steps: max spread %.3g (tol 1e-8)", K, worst)));
  }

  // Muon's rotated weights do not depend on the basis.
  {
    const OptimizerConfig opt{OptimizerKind::Muon, o.eta, ExactSign{}};
    const EmbeddingBasis other = random_basis(K, o.seed + 1);
    MemoryState a = zero_state(K), b = zero_state(K);
    double worst = 0.0;
    for (int t = 1; t <= 50; ++t) {
      step(a, opt, basis, small);
      step(b, opt, other, small);
      worst = std::max(worst, max_norm(rotate(a.w, basis) - rotate(b.w, other)));
    }
    out.push_back(check("structure/muon-basis-equivariance", worst <= 1e-8,
                        fmt("K=%.0f, two basis seeds, 50 steps: max |W^a - W^b| = %.3g", K, worst)));
  }
  return out;
}

std::vector<CheckResult> phase_checks(const VerifyOptions& o, const KnowledgeSpec& full) {
  std::vector<CheckResult> out;
  if (full.C <= 2 * full.M + 1 || full.alpha <= 0.0) {
    out.push_back({"phase-window", true, true, "skipped: needs alpha > 0 and C > 2M + 1"});
    return out;
  }
  const TheoryPrediction win = muon_phase_window(o.eta, full.K(), full.M, full.C, full.alpha);
  RunConfig rc;
  rc.spec = full;
  rc.seed = o.seed;
  rc.opt = {OptimizerKind::Muon, o.eta, ExactSign{}};
  rc.steps = std::max<long>(50, static_cast<long>(std::ceil(win.hi)) + 20);
  rc.engine = Engine::Block;
  const Trajectory tr = run(rc);
  const auto [first, last] = std::pair{*std::min_element(tr.onset_first.begin(), tr.onset_first.end()),
                                       *std::max_element(tr.onset_last.begin(), tr.onset_last.end())};
  const bool all_reached = std::none_of(tr.onset_last.begin(), tr.onset_last.end(), [](long x) { return x < 0; });
  const bool inside = all_reached && first >= win.lo - 1.0 && last <= win.hi + 1.0;
  out.push_back(check("phase-window/onset", inside,
                      fmt("onsets in [%.0f, %.0f], predicted window [%.3f, %.3f] +- 1 step", first, last, win.lo, win.hi)));

  const double cap = o.eta * o.eta;
  double worst = -INFINITY;
  for (const auto& r : tr.records)
    if (r.step > win.hi) worst = std::max(worst, r.excess_risk);
  out.push_back(check("phase-window/plateau", worst <= cap,
                      fmt("max excess risk after T_hi = %.4g, ceiling eta^2 = %.4g", worst, cap)));
  return out;
}

std::vector<CheckResult> stability_checks(const KnowledgeSpec& full) {
  std::vector<CheckResult> out;
  if (full.alpha <= 0.0) {
    out.push_back({"stability", true, true, "skipped: no finite fixed point without noise"});
    return out;
  }
  const int K = full.K();
  const double p = full.item_freq(0);
  const double thr = gd_stability_threshold(K, full.alpha);
  const double target = margin_fixed_point(K, full.alpha).value;
  const long steps = 100000;

  auto iterate = [&](double factor, double& final_gap, double& tail_min) {
    const double eta = factor * thr / p;
    double d = 0.0;
    tail_min = INFINITY;
    for (long t = 1; t <= steps; ++t) {
      d = gd_margin_step(d, eta, p, K, full.alpha);
      if (!std::isfinite(d)) break;
      if (t > steps - 1000) tail_min = std::min(tail_min, std::abs(d - target));
    }
    final_gap = std::abs(d - target);
  };
  double gap = 0.0, tail = 0.0;
  iterate(0.5, gap, tail);
  out.push_back(check("stability/below-threshold", gap <= 1e-6,
                      fmt("eta*p1 = 0.5 x %.4g: |Delta - Delta*| = %.3g after 1e5 steps", thr, gap)));
  iterate(1.5, gap, tail);
  out.push_back(check("stability/above-threshold", !(tail < 1e-3),
                      fmt("eta*p1 = 1.5 x %.4g: min |Delta - Delta*| over the last 1000 steps = %.3g", thr, tail)));
  return out;
}

}  // namespace

KnowledgeSpec verify_spec(int M, int C, double alpha) {
  if (M == 10) return build_spec(M, C, ExplicitSpectrum{{0.15, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05}}, alpha);
  return build_spec(M, C, PowerLawSpectrum{1.5}, alpha);
}

std::vector<CheckResult> run_verify_suite(const VerifyOptions& o) {
  if (o.M < 1 || o.K < 2 * o.M || o.K % o.M != 0) throw InvalidArgument("verify: K must be a multiple of M with C >= 2");
  const std::string& s = o.suite;
  if (s != "all" && s != "margin" && s != "msgn" && s != "structure" && s != "phase" && s != "stability")
    throw InvalidArgument("verify: unknown suite '" + s + "'");
  const int C = o.K / o.M;
  const KnowledgeSpec full = verify_spec(o.M, C, o.alpha);
  const KnowledgeSpec small = verify_spec(o.M, std::min(C, std::max(2, o.dense_group_cap)), o.alpha);

  std::vector<CheckResult> out;
  auto add = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
  if (s == "all" || s == "margin") add(margin_checks(o, full, small));
  if (s == "all" || s == "msgn") add(msgn_checks(o, full, small));
  if (s == "all" || s == "structure") add(structure_checks(o, small));
  if (s == "all" || s == "phase") add(phase_checks(o, full));
  if (s == "all" || s == "stability") add(stability_checks(full));
  return out;
}

DenseMatrix conditioned_matrix(int n, int m, double cond, std::uint64_t seed) {
  if (n < 1 || m < 1 || !(cond >= 1.0)) throw InvalidArgument("conditioned_matrix: bad arguments");
  const int r = std::min(n, m);
  const DenseMatrix u = random_basis(n, seed).e.leftCols(r);
  const DenseMatrix v = random_basis(m, seed ^ 0x9e3779b97f4a7c15ull).e.leftCols(r);
  Vector s(r);
  for (int i = 0; i < r; ++i) s[i] = r == 1 ? 1.0 : std::pow(cond, static_cast<double>(i) / (r - 1));
  return u * s.asDiagonal() * v.transpose();
}

std::vector<SignBenchRow> msgn_benchmark(const std::vector<int>& sizes, int trials, int iterations, double cond,
                                         std::uint64_t seed) {
  if (trials < 1 || iterations < 1) throw InvalidArgument("msgn_benchmark: trials and iterations must be >= 1");
  using clock = std::chrono::steady_clock;
  std::vector<SignBenchRow> rows;
  const std::pair<const char*, SignMethod> methods[] = {
      {"exact", ExactSign{}},
      {"newton-schulz/convergent", NewtonSchulz{iterations, NewtonSchulz::kConvergent}},
      {"newton-schulz/muon", NewtonSchulz{iterations, NewtonSchulz::kMuon}},
  };
  for (int n : sizes) {
    std::vector<DenseMatrix> inputs, exact;
    for (int k = 0; k < trials; ++k) {
      inputs.push_back(conditioned_matrix(n, n, cond, seed + static_cast<std::uint64_t>(k)));
      exact.push_back(matrix_sign(inputs.back()));
    }
    for (const auto& [name, method] : methods) {
      SignBenchRow row{name, n, trials, 0.0, 0.0};
      double micros = 0.0;
      for (int k = 0; k < trials; ++k) {
        const auto t0 = clock::now();
        const DenseMatrix s = matrix_sign(inputs[k], method);
        micros += std::chrono::duration<double, std::micro>(clock::now() - t0).count();
        row.max_spectral_error = std::max(row.max_spectral_error, spectral_norm(s - exact[k]));
      }
      row.mean_micros = micros / trials;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace amem
