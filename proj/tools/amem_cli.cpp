// SPDX-License-Identifier: Apache-2.0
// Command-line front end: simulate, sweep, scaling, verify, msgn-bench.
// Exit codes: 0 ok, 1 verify failures, 2 bad arguments or config, 3 numerical abort, 4 I/O.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amem/config.hpp"
#include "amem/errors.hpp"
#include "amem/harness.hpp"
#include "amem/theory.hpp"
#include "amem/verify.hpp"

namespace {

using namespace amem;

// Options shared by the run-style subcommands. A flag is applied only when given.
struct Overrides {
  std::string config, preset, optimizer, probes, out, format;
  double eta = 0, alpha = 0, beta = 0;
  int M = 0, C = 0, jobs = 1;
  long steps = 0;
  std::uint64_t seed = 0;
  CLI::Option *o_config{}, *o_preset{}, *o_optimizer{}, *o_probes{}, *o_out{}, *o_format{}, *o_eta{}, *o_alpha{},
      *o_beta{}, *o_M{}, *o_C{}, *o_steps{}, *o_seed{}, *o_jobs{};

  void attach(CLI::App* app) {
    o_config = app->add_option("--config", config, "JSON config file");
    o_preset = app->add_option("--preset", preset, "Shipped preset name (see presets/)");
    o_optimizer = app->add_option("--optimizer", optimizer, "gd | muon | signgd | tra-signgd")
                      ->check(CLI::IsMember({"gd", "muon", "signgd", "tra-signgd"}));
    o_eta = app->add_option("--eta", eta, "Learning rate");
    o_alpha = app->add_option("--alpha", alpha, "Label-noise level in [0, 1)");
    o_M = app->add_option("--M", M, "Number of groups");
    o_C = app->add_option("--C", C, "Items per group");
    o_beta = app->add_option("--beta", beta, "Power-law exponent of the group frequencies (> 1)");
    o_steps = app->add_option("--steps", steps, "Number of optimizer steps (>= 1)");
    o_seed = app->add_option("--seed", seed, "Embedding basis seed");
    o_probes = app->add_option("--probes", probes, "Comma list: losses,delta_gap,msgn_deviation,weight_structure");
    o_jobs = app->add_option("--jobs", jobs, "Concurrent sweep cells")->check(CLI::PositiveNumber);
    o_out = app->add_option("--out", out, "Output path");
    o_format = app->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (*o_preset) c = load_preset(preset, c);
    if (*o_config) c = load_config(config, c);
    if (*o_optimizer) c.optimizer.kind = parse_optimizer(optimizer);
    if (*o_eta) c.optimizer.eta = eta;
    if (*o_alpha) c.alpha = alpha;
    if (*o_M) c.M = M;
    if (*o_C) c.C = C;
    if (*o_beta) c.spectrum = PowerLawSpectrum{beta};
    if (*o_steps) c.steps = steps;
    if (*o_seed) c.seed = seed;
    if (*o_probes) c.probes = parse_probes(probes);
    if (*o_out) c.output = out;
    if (*o_format) c.format = parse_format(format);
    if (c.steps < 1) throw InvalidArgument("steps must be >= 1");
    return c;
  }
};

std::string g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string default_output(const std::string& stem, ExportFormat f) { return stem + "." + to_string(f); }

void print_config_line(const ExperimentConfig& c, const RunConfig& rc) {
  std::cout << "config: K=" << rc.spec.K() << " M=" << c.M << " C=" << c.C << " alpha=" << g(c.alpha)
            << " optimizer=" << to_string(c.optimizer.kind) << " eta=" << g(c.optimizer.eta) << " steps=" << c.steps
            << " seed=" << c.seed << " engine=" << to_string(resolve_engine(rc)) << "\n";
}

int cmd_simulate(const Overrides& ov) {
  ExperimentConfig c = ov.resolve();
  const RunConfig rc = c.run_config();
  const std::string path = c.output.value_or(default_output("trajectory", c.format));
  const ExperimentResult res = run_experiment(rc, c.probes, c.theory_overlay, path, c.format);
  const Trajectory& tr = res.trajectory;
  const double l_star = optimal_loss(c.alpha, rc.spec.K());

  print_config_line(c, rc);
  std::cout << "fingerprint: " << tr.fingerprint << "\n"
            << "L* = " << g(l_star) << "\n"
            << "loss: initial " << g(tr.records.front().total_loss) << ", final " << g(tr.records.back().total_loss)
            << " (excess " << g(tr.records.back().excess_risk) << ")\n"
            << "delta_gap at final step: " << g(tr.records.back().delta_gap) << "\n";
  const auto [first, last] = onset_range(tr);
  if (first >= 0) std::cout << "oscillation onset: steps " << first << ".." << last << "\n";
  if (c.optimizer.kind == OptimizerKind::Muon && c.alpha > 0.0 && c.C > 2 * c.M + 1) {
    const TheoryPrediction w = muon_phase_window(c.optimizer.eta, rc.spec.K(), c.M, c.C, c.alpha);
    std::cout << "predicted onset window: [" << g(w.lo) << ", " << g(w.hi) << "]\n";
  }
  if (c.optimizer.kind == OptimizerKind::GD && c.alpha > 0.0) {
    const double ratio = c.optimizer.eta * rc.spec.item_freq(0) / gd_stability_threshold(rc.spec.K(), c.alpha);
    std::cout << "eta*p1 / stability threshold = " << g(ratio) << (ratio < 1.0 ? " (stable)" : " (unstable)") << "\n";
  }
  std::cout << "wrote " << tr.records.size() << " records to " << path << "\n";
  return 0;
}

SweepResult do_sweep(const ExperimentConfig& c, OptimizerKind kind, int jobs) {
  SweepConfig sc;
  sc.base = c.run_config();
  sc.base.opt.kind = kind;
  sc.budgets = c.sweep.budgets.empty() ? default_budgets(c) : c.sweep.budgets;
  sc.eta_grid = c.sweep.eta_grid;
  sc.final_window = c.sweep.final_window;
  sc.jobs = jobs;
  return sweep_lr(sc);
}

void print_sweep(const SweepResult& s) {
  std::cout << to_string(s.kind) << " (L* = " << g(s.l_star) << ", loss = mean of last " << s.final_window
            << " step(s)):\n";
  for (const SweepEntry& e : s.entries)
    std::cout << "  T=" << e.budget << "  best_eta=" << g(e.best_eta) << "  min_loss=" << g(e.min_loss)
              << "  excess=" << g(e.min_loss - s.l_star) << "\n";
}

std::optional<FitResult> try_fit(const SweepResult& s) {
  std::vector<std::pair<double, double>> pts;
  for (const SweepEntry& e : s.entries) pts.emplace_back(static_cast<double>(e.budget), e.min_loss);
  try {
    return fit_power_law(pts, s.l_star);
  } catch (const InvalidArgument& e) {
    std::cout << "  no fit: " << e.what() << "\n";
    return std::nullopt;
  }
}

void print_fit(const FitResult& f) {
  std::cout << "  fit: excess = " << g(f.a) << " * T^-" << g(f.gamma) << "  (rms log residual " << g(f.residual)
            << ", " << f.points << " points)\n";
}

int cmd_sweep(const Overrides& ov, bool scaling) {
  ExperimentConfig c = ov.resolve();
  std::vector<OptimizerKind> kinds{c.optimizer.kind};
  if (scaling) {
    kinds = c.sweep.optimizers;
    if (kinds.empty()) kinds = {OptimizerKind::Muon, OptimizerKind::GD};
  }
  const std::string path = c.output.value_or(default_output(scaling ? "scaling" : "sweep", c.format));
  std::cout << "config: K=" << static_cast<long long>(c.M) * c.C << " M=" << c.M << " C=" << c.C
            << " alpha=" << g(c.alpha) << " jobs=" << ov.jobs << "\n";

  std::vector<SweepResult> sweeps;
  std::vector<FitResult> fits;
  bool all_fit = true;
  for (OptimizerKind k : kinds) {
    sweeps.push_back(do_sweep(c, k, ov.jobs));
    print_sweep(sweeps.back());
    if (auto f = try_fit(sweeps.back())) {
      print_fit(*f);
      fits.push_back(*f);
    } else {
      all_fit = false;
    }
  }
  if (!all_fit) fits.clear();  // keep fits aligned with sweeps
  if (scaling) {
    if (const auto* p = std::get_if<PowerLawSpectrum>(&c.spectrum)) {
      const ScalingExponents ex = scaling_exponents(p->beta);
      std::cout << "predicted exponents: gd " << g(ex.gd) << ", muon " << g(ex.muon) << "\n";
    }
  }
  export_sweeps(sweeps, fits, path, c.format);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_verify(const VerifyOptions& vo) {
  const int C = vo.M > 0 ? vo.K / vo.M : 0;
  std::cout << "verify suite '" << vo.suite << "': K=" << vo.K << " M=" << vo.M << " C=" << C
            << " alpha=" << g(vo.alpha) << " eta=" << g(vo.eta) << "\n";
  if (C > vo.dense_group_cap)
    std::cout << "note: dense cross-checks use C=" << vo.dense_group_cap << " (K=" << vo.M * vo.dense_group_cap
              << "); block checks use the full K\n";
  const std::vector<CheckResult> res = run_verify_suite(vo);
  int failed = 0;
  for (const CheckResult& r : res) {
    const char* tag = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
    std::cout << tag << "  " << r.name << ": " << r.detail << "\n";
    if (!r.passed) ++failed;
  }
  std::cout << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << "\n";
  return failed ? 1 : 0;
}

int cmd_bench(const std::vector<int>& sizes, int trials, int iterations, double cond, const std::string& out) {
  const auto rows = msgn_benchmark(sizes, trials, iterations, cond, 0);
  std::printf("%-26s %6s %8s %16s %14s\n", "method", "n", "trials", "max_spec_error", "mean_us");
  std::ostringstream csv;
  csv << "method,n,trials,max_spectral_error,mean_micros\n";
  for (const auto& r : rows) {
    std::printf("%-26s %6d %8d %16.3e %14.1f\n", r.method.c_str(), r.n, r.trials, r.max_spectral_error, r.mean_micros);
    csv << r.method << ',' << r.n << ',' << r.trials << ',' << r.max_spectral_error << ',' << r.mean_micros << "\n";
  }
  if (!out.empty()) {
    write_text(out, csv.str());
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate optimizers on a linear softmax associative memory"};
  app.require_subcommand(1);

  Overrides sim_ov, sweep_ov, scaling_ov;
  CLI::App* sim = app.add_subcommand("simulate", "Run one trajectory and export it");
  sim_ov.attach(sim);
  CLI::App* sweep = app.add_subcommand("sweep", "Learning-rate sweep per budget for one optimizer, plus a power-law fit");
  sweep_ov.attach(sweep);
  CLI::App* scaling = app.add_subcommand("scaling", "Sweeps and fits for several optimizers (default muon and gd)");
  scaling_ov.attach(scaling);

  VerifyOptions vo;
  CLI::App* verify = app.add_subcommand("verify", "Theory-versus-simulation invariant checks");
  verify->add_option("--suite", vo.suite, "all | margin | msgn | structure | phase | stability")
      ->check(CLI::IsMember({"all", "margin", "msgn", "structure", "phase", "stability"}));
  verify->add_option("--K", vo.K, "Total items");
  verify->add_option("--M", vo.M, "Number of groups");
  verify->add_option("--alpha", vo.alpha, "Label-noise level");
  verify->add_option("--eta", vo.eta, "Muon learning rate");
  verify->add_option("--seed", vo.seed, "Embedding basis seed");

  std::vector<int> sizes{16, 64, 128};
  int trials = 10, iterations = 12;
  double cond = 10.0;
  std::string bench_out;
  CLI::App* bench = app.add_subcommand("msgn-bench", "Exact versus Newton-Schulz matrix sign: accuracy and time");
  bench->add_option("--sizes", sizes, "Square matrix sizes")->delimiter(',');
  bench->add_option("--trials", trials, "Matrices per size")->check(CLI::PositiveNumber);
  bench->add_option("--iterations", iterations, "Newton-Schulz iterations")->check(CLI::PositiveNumber);
  bench->add_option("--cond", cond, "Condition number of the test matrices");
  bench->add_option("--out", bench_out, "Optional CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_ov);
    if (sweep->parsed()) return cmd_sweep(sweep_ov, false);
    if (scaling->parsed()) return cmd_sweep(scaling_ov, true);
    if (verify->parsed()) return cmd_verify(vo);
    if (bench->parsed()) return cmd_bench(sizes, trials, iterations, cond, bench_out);
  } catch (const NumericalError& e) {
    std::cerr << "error: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
