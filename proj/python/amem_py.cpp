// SPDX-License-Identifier: Apache-2.0
// Python bindings. Configurations cross the boundary as JSON text so the
// Python side accepts exactly what the CLI accepts.
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "amem/config.hpp"
#include "amem/errors.hpp"
#include "amem/harness.hpp"
#include "amem/linalg.hpp"
#include "amem/memory_model.hpp"
#include "amem/runner.hpp"
#include "amem/theory.hpp"
#include "amem/verify.hpp"

namespace py = pybind11;
using namespace amem;

namespace {

ExperimentConfig resolve(const std::string& json_text, const std::string& preset) {
  ExperimentConfig base;
  if (!preset.empty()) base = load_preset(preset);
  return json_text.empty() ? base : parse_config(json_text, base);
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::dict trajectory_dict(const Trajectory& tr, int M, const std::vector<std::optional<double>>& overlay) {
  const size_t n = tr.records.size();
  std::vector<long> step(n);
  std::vector<double> total(n), excess(n), gap(n), msgn(n), structure(n);
  py::array_t<double> groups({n, static_cast<size_t>(M)});
  auto g = groups.mutable_unchecked<2>();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t i = 0; i < n; ++i) {
    const auto& r = tr.records[i];
    step[i] = r.step;
    total[i] = r.total_loss;
    excess[i] = r.excess_risk;
    gap[i] = r.delta_gap;
    msgn[i] = r.msgn_inf_dev.value_or(nan);
    structure[i] = r.structure_dev.value_or(nan);
    for (int k = 0; k < M; ++k) g(i, k) = r.group_losses[static_cast<size_t>(k)];
  }
  py::dict d;
  d["fingerprint"] = tr.fingerprint;
  d["step"] = py::array_t<long>(n, step.data());
  d["total_loss"] = to_array(total);
  d["excess_risk"] = to_array(excess);
  d["group_losses"] = groups;
  d["delta_gap"] = to_array(gap);
  d["msgn_deviation"] = to_array(msgn);
  d["structure_deviation"] = to_array(structure);
  d["onset_first"] = tr.onset_first;
  d["onset_last"] = tr.onset_last;
  if (!overlay.empty()) {
    std::vector<double> th(n);
    for (size_t i = 0; i < n; ++i) th[i] = overlay[i].value_or(nan);
    d["theory_total_loss"] = to_array(th);
  }
  return d;
}

SignMethod sign_method(const std::string& method, int iterations, const std::string& coefficients) {
  if (method == "exact") return ExactSign{};
  if (method != "newton_schulz") throw InvalidArgument("unknown sign method '" + method + "'");
  NewtonSchulz ns;
  ns.iterations = iterations;
  if (coefficients == "convergent")
    ns.coeffs = NewtonSchulz::kConvergent;
  else if (coefficients == "muon")
    ns.coeffs = NewtonSchulz::kMuon;
  else
    throw InvalidArgument("unknown coefficient set '" + coefficients + "'");
  return ns;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Associative-memory optimizer dynamics (C++ core)";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("preset_names", &preset_names);
  m.def("preset_directory", &preset_directory);
  m.def(
      "resolve_config",
      [](const std::string& json_text, const std::string& preset) { return to_json(resolve(json_text, preset)); },
      py::arg("config_json") = "", py::arg("preset") = "",
      "Canonical JSON of defaults, then the preset, then the given keys.");

  m.def(
      "simulate",
      [](const std::string& json_text, const std::string& preset) {
        const ExperimentConfig c = resolve(json_text, preset);
        const RunConfig rc = c.run_config();
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(rc, c.probes, c.theory_overlay);
        }
        return trajectory_dict(res.trajectory, rc.spec.M, res.overlay);
      },
      py::arg("config_json") = "", py::arg("preset") = "");

  m.def(
      "sweep",
      [](const std::string& json_text, const std::string& preset, int jobs) {
        const ExperimentConfig c = resolve(json_text, preset);
        SweepConfig sc;
        sc.base = c.run_config();
        sc.budgets = c.sweep.budgets.empty() ? default_budgets(c) : c.sweep.budgets;
        sc.eta_grid = c.sweep.eta_grid;
        sc.final_window = c.sweep.final_window;
        sc.jobs = jobs;
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = sweep_lr(sc);
        }
        py::dict d;
        d["optimizer"] = to_string(r.kind);
        d["l_star"] = r.l_star;
        std::vector<long> budgets;
        std::vector<double> best, loss;
        for (const auto& e : r.entries) {
          budgets.push_back(e.budget);
          best.push_back(e.best_eta);
          loss.push_back(e.min_loss);
        }
        d["budget"] = budgets;
        d["best_eta"] = best;
        d["min_loss"] = loss;
        return d;
      },
      py::arg("config_json") = "", py::arg("preset") = "", py::arg("jobs") = 1);

  m.def(
      "fit_power_law",
      [](const std::vector<double>& budgets, const std::vector<double>& losses, double l_star) {
        if (budgets.size() != losses.size()) throw InvalidArgument("budgets and losses differ in length");
        std::vector<std::pair<double, double>> pts;
        for (size_t i = 0; i < budgets.size(); ++i) pts.emplace_back(budgets[i], losses[i]);
        const FitResult f = fit_power_law(pts, l_star);
        py::dict d;
        d["a"] = f.a;
        d["gamma"] = f.gamma;
        d["residual"] = f.residual;
        d["points"] = f.points;
        return d;
      },
      py::arg("budgets"), py::arg("losses"), py::arg("l_star"));

  m.def(
      "loss_and_gradient",
      [](const DenseMatrix& w, const std::string& json_text, const std::string& preset) {
        const RunConfig rc = resolve(json_text, preset).run_config();
        if (w.rows() != rc.spec.K() || w.cols() != rc.spec.K())
          throw InvalidArgument("W must be " + std::to_string(rc.spec.K()) + " x " + std::to_string(rc.spec.K()));
        const EmbeddingBasis basis = rc.identity_basis ? identity_basis(rc.spec.K()) : random_basis(rc.spec.K(), rc.seed);
        const LossGradient lg = loss_and_gradient({w, 0}, basis, rc.spec);
        return py::make_tuple(loss({w, 0}, basis, rc.spec), lg.grad_raw);
      },
      py::arg("w"), py::arg("config_json") = "", py::arg("preset") = "",
      "Total loss and its gradient with respect to the raw weights W.");

  m.def(
      "matrix_sign",
      [](const DenseMatrix& a, const std::string& method, int iterations, const std::string& coefficients) {
        return matrix_sign(a, sign_method(method, iterations, coefficients));
      },
      py::arg("a"), py::arg("method") = "exact", py::arg("iterations") = 5, py::arg("coefficients") = "convergent");

  m.def("optimal_loss", &optimal_loss, py::arg("alpha"), py::arg("K"));
  m.def(
      "margin_fixed_point", [](int K, double alpha) { return margin_fixed_point(K, alpha).value; }, py::arg("K"),
      py::arg("alpha"));
  m.def("gd_margin_step", &gd_margin_step, py::arg("delta"), py::arg("eta"), py::arg("p"), py::arg("K"),
        py::arg("alpha"));
  m.def("gd_stability_threshold", &gd_stability_threshold, py::arg("K"), py::arg("alpha"));
  m.def(
      "muon_phase_window",
      [](double eta, int K, int M, int C, double alpha) {
        const TheoryPrediction p = muon_phase_window(eta, K, M, C, alpha);
        return py::make_tuple(p.lo, p.hi);
      },
      py::arg("eta"), py::arg("K"), py::arg("M"), py::arg("C"), py::arg("alpha"));
  m.def(
      "scaling_exponents",
      [](double beta) {
        const ScalingExponents s = scaling_exponents(beta);
        py::dict d;
        d["gd"] = s.gd;
        d["muon"] = s.muon;
        return d;
      },
      py::arg("beta"));

  m.def(
      "verify",
      [](const std::string& suite, int K, int M, double alpha, double eta, std::uint64_t seed) {
        VerifyOptions o;
        o.suite = suite;
        o.K = K;
        o.M = M;
        o.alpha = alpha;
        o.eta = eta;
        o.seed = seed;
        std::vector<CheckResult> checks;
        {
          py::gil_scoped_release release;
          checks = run_verify_suite(o);
        }
        py::list out;
        for (const auto& c : checks) {
          py::dict d;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["skipped"] = c.skipped;
          d["detail"] = c.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("suite") = "all", py::arg("K") = 1000, py::arg("M") = 10, py::arg("alpha") = 0.1, py::arg("eta") = 0.75,
      py::arg("seed") = 0);
}
