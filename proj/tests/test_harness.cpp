// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "amem/block_dynamics.hpp"
#include "amem/errors.hpp"
#include "amem/harness.hpp"
#include "amem/theory.hpp"

using namespace amem;

namespace {

const std::vector<double> kLongTail{0.15, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05};

RunConfig fig1(OptimizerKind kind, double eta, long steps = 50) {
  RunConfig rc;
  rc.spec = build_spec(10, 10, ExplicitSpectrum{kLongTail}, 0.1);
  rc.opt = {kind, eta};
  rc.steps = steps;
  return rc;
}

RunConfig fig3_block(double eta, long steps) {
  RunConfig rc;
  rc.spec = build_spec(10, 100, ExplicitSpectrum{kLongTail}, 0.1);
  rc.opt = {OptimizerKind::Muon, eta};
  rc.steps = steps;
  rc.engine = Engine::Block;
  return rc;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("amem_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  return sxy / sxx;
}

}  // namespace

TEST(DeltaGap, Examples) {
  ProbabilityTable t;
  t.cond = DenseMatrix::Constant(4, 4, 0.25);
  EXPECT_EQ(delta_gap(t), 0.0);
  t.cond.diagonal() << 0.9, 0.1, 0.1, 0.1;
  EXPECT_NEAR(delta_gap(t), 0.8, 1e-15);
}

TEST(DeltaGap, MuonBelowLargeStepGd) {
  const Trajectory mu = run(fig1(OptimizerKind::Muon, 0.75));
  const Trajectory gd = run(fig1(OptimizerKind::GD, 25 * 0.75));
  EXPECT_LT(mu.records.back().delta_gap, gd.records.back().delta_gap);
}

TEST(Experiment, Fig1Ordering) {
  const double l_star = optimal_loss(0.1, 100);
  const double muon = run(fig1(OptimizerKind::Muon, 0.75)).records.back().total_loss;
  const double tra = run(fig1(OptimizerKind::TraSignGD, 0.75)).records.back().total_loss;
  const double gd = run(fig1(OptimizerKind::GD, 0.75)).records.back().total_loss;
  const double sign = run(fig1(OptimizerKind::SignGD, 0.75)).records.back().total_loss;
  EXPECT_LT(muon - l_star, 0.05);
  EXPECT_LT(tra - l_star, 0.05);
  EXPECT_GT(gd - l_star, 1.0);
  EXPECT_GT(sign, muon);
}

TEST(Experiment, ZeroStepsAndPersistence) {
  const std::string path = temp_path("zero.json");
  RunConfig rc = fig1(OptimizerKind::GD, 1.0, 0);
  const ExperimentResult r = run_experiment(rc, {}, false, path, ExportFormat::Json);
  ASSERT_EQ(r.trajectory.records.size(), 1u);
  EXPECT_NEAR(r.trajectory.records[0].total_loss, std::log(100.0), 1e-12);
  EXPECT_EQ(import_trajectory_json(path), r.trajectory);
  std::filesystem::remove(path);
  try {
    run_experiment(rc, {}, false, std::string("/nonexistent-dir/x.csv"));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x.csv"), std::string::npos);
  }
}

// With column symmetry the GD overlay is exact, not just asymptotic.
TEST(Overlay, GdMarginRecursionMatchesDenseSimulation) {
  RunConfig rc = fig1(OptimizerKind::GD, 5.0, 200);
  rc.record_every = 10;
  const Trajectory tr = run(rc);
  const auto ov = theory_overlay(rc, tr);
  ASSERT_EQ(ov.size(), tr.records.size());
  for (size_t i = 0; i < ov.size(); ++i) {
    ASSERT_TRUE(ov[i].has_value());
    EXPECT_NEAR(*ov[i], tr.records[i].total_loss, 1e-10);
  }
}

TEST(Overlay, MuonNoiselessAndPlateau) {
  RunConfig rc = fig1(OptimizerKind::Muon, 1.0, 25);
  rc.spec = build_spec(10, 10, ExplicitSpectrum{kLongTail}, 0.0);
  const Trajectory tr = run(rc);
  const auto ov = theory_overlay(rc, tr);
  EXPECT_FALSE(ov[0].has_value());
  for (size_t i = 5; i < ov.size(); ++i) {
    const double ratio = tr.records[i].total_loss / *ov[i];
    EXPECT_GT(ratio, 0.5);
    EXPECT_LT(ratio, 2.0);
  }
  const RunConfig noisy = fig3_block(0.75, 40);
  const Trajectory nt = run(noisy);
  const auto nov = theory_overlay(noisy, nt);
  const double hi = muon_phase_window(0.75, 1000, 10, 100, 0.1).hi;
  for (size_t i = 0; i < nov.size(); ++i) {
    EXPECT_EQ(nov[i].has_value(), nt.records[i].step > hi);
    if (nov[i]) EXPECT_LE(nt.records[i].total_loss, *nov[i]);
  }
}

TEST(Fit, RecoversExactPowerLaw) {
  const FitResult f = fit_power_law({{10, 0.5 + 3e-2}, {100, 0.5 + 3e-4}, {1000, 0.5 + 3e-6}}, 0.5);
  EXPECT_NEAR(f.a, 3.0, 1e-9);
  EXPECT_NEAR(f.gamma, 2.0, 1e-9);
  EXPECT_LT(f.residual, 1e-9);
  EXPECT_EQ(f.points, 3);
  EXPECT_DOUBLE_EQ(f.t_min, 10.0);
  EXPECT_DOUBLE_EQ(f.t_max, 1000.0);
}

TEST(Fit, RandomExactPowerLaws) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ua(0.1, 10.0), ug(0.2, 3.0), ul(0.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const double a = ua(rng), gamma = ug(rng), l = ul(rng);
    std::vector<std::pair<double, double>> pts;
    for (double T : {8.0, 16.0, 40.0, 100.0, 256.0}) pts.emplace_back(T, l + a * std::pow(T, -gamma));
    const FitResult f = fit_power_law(pts, l);
    EXPECT_NEAR(f.gamma, gamma, 1e-9);
    EXPECT_NEAR(f.a / a, 1.0, 1e-9);
    EXPECT_GE(f.residual, 0.0);
  }
}

TEST(Fit, Errors) {
  try {
    fit_power_law({{10, 1.0}, {20, 0.4}, {30, 0.3}}, 0.5);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_STREQ(e.what(), "excess risk non-positive");
  }
  EXPECT_THROW(fit_power_law({{10, 1.0}, {20, 0.9}}, 0.5), InvalidArgument);
}

TEST(Sweep, SingletonGridAndErrors) {
  SweepConfig sc;
  sc.base = fig1(OptimizerKind::GD, 1.0);
  sc.budgets = {5, 10};
  sc.eta_grid = {2.5};
  const SweepResult r = sweep_lr(sc);
  ASSERT_EQ(r.entries.size(), 2u);
  for (const auto& e : r.entries) EXPECT_EQ(e.best_eta, 2.5);
  sc.budgets.clear();
  EXPECT_THROW(sweep_lr(sc), InvalidArgument);
  sc.budgets = {5};
  sc.base.opt.kind = OptimizerKind::SignGD;
  sc.eta_grid.clear();
  EXPECT_THROW(sweep_lr(sc), InvalidArgument);  // no default grid for signgd
}

TEST(Sweep, ParallelEqualsSequentialAndMinIsMinimum) {
  SweepConfig sc;
  sc.base = fig3_block(0.5, 1);
  sc.budgets = {20, 30, 40};
  sc.jobs = 1;
  const SweepResult a = sweep_lr(sc);
  sc.jobs = 3;
  const SweepResult b = sweep_lr(sc);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].eta, b.cells[i].eta);
    EXPECT_EQ(a.cells[i].final_loss, b.cells[i].final_loss);
  }
  for (const auto& e : a.entries) {
    double m = INFINITY;
    for (const auto& c : a.cells)
      if (c.budget == e.budget) m = std::min(m, c.final_loss);
    EXPECT_EQ(e.min_loss, m);
  }
}

TEST(Sweep, MuonBudgetBoundAndEnvelope) {
  SweepConfig sc;
  sc.base = fig3_block(0.5, 1);
  sc.budgets = {20, 40, 80};
  sc.final_window = 2;
  const SweepResult r = sweep_lr(sc);
  for (const auto& e : r.entries) {
    const double lr = muon_budget_lr(e.budget, 1000, 10, 100, 0.1);
    EXPECT_LE(e.min_loss - r.l_star, lr * lr) << "T=" << e.budget;
  }
  for (size_t i = 1; i < r.entries.size(); ++i) EXPECT_LE(r.entries[i].min_loss, r.entries[i - 1].min_loss);
  // Doubling the budget cuts the tuned excess risk by about 4.
  for (size_t i = 1; i < r.entries.size(); ++i) {
    const double ratio = (r.entries[i - 1].min_loss - r.l_star) / (r.entries[i].min_loss - r.l_star);
    EXPECT_GT(ratio, 2.0);
    EXPECT_LT(ratio, 8.0);
  }
}

TEST(Invariants, MuonPlateauAfterPhaseWindow) {
  for (double eta : {0.5, 0.75, 1.0}) {
    const Trajectory tr = run(fig3_block(eta, 80));
    const double hi = muon_phase_window(eta, 1000, 10, 100, 0.1).hi;
    for (const auto& r : tr.records)
      if (r.step > hi) EXPECT_LE(r.excess_risk, eta * eta) << "eta=" << eta << " step " << r.step;
  }
}

// Late-time decay of each group's excess risk under stable GD. The linearized
// recursion contracts the margin error by 1 - eta p alpha p_c per step and the
// excess is quadratic in it, so the log-slope is about -2 eta p alpha p_c.
TEST(Invariants, GdLateRate) {
  RunConfig rc;
  rc.spec = build_spec(10, 10, ExplicitSpectrum{kLongTail}, 0.1);
  const double eta = 1.0 / rc.spec.item_freq(0);
  rc.opt = {OptimizerKind::GD, eta};
  rc.steps = 1500;
  rc.engine = Engine::Block;
  const Trajectory tr = run(rc);
  const double l_star = optimal_loss(0.1, 100);
  for (int g = 0; g < 10; ++g) {
    std::vector<double> t, y;
    for (const auto& r : tr.records) {
      const double ex = r.group_losses[g] - l_star;
      if (ex < 1e-4 && ex > 1e-9) {
        t.push_back(static_cast<double>(r.step));
        y.push_back(std::log(ex));
      }
    }
    ASSERT_GE(t.size(), 5u) << "group " << g;
    const double p = rc.spec.group_freq[g] / 10;
    const double predicted = std::log(std::pow(1.0 - eta * p * 0.1 * rc.spec.p_correct(), 2));
    EXPECT_NEAR(slope(t, y) / predicted, 1.0, 0.2) << "group " << g;
  }
}

TEST(Export, CsvSchema) {
  const Trajectory tr = run(fig1(OptimizerKind::Muon, 0.75));
  const std::string csv = trajectory_csv(tr, 10);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line,
            "step,total_loss,excess_risk,delta_gap,msgn_inf_dev,structure_dev,group_loss_1,group_loss_2,group_loss_3,"
            "group_loss_4,group_loss_5,group_loss_6,group_loss_7,group_loss_8,group_loss_9,group_loss_10");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15);
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    f.resize(16);
    EXPECT_TRUE(f[4].empty());
    EXPECT_TRUE(f[5].empty());
  }
  EXPECT_EQ(rows, 51);
}

TEST(Export, CsvRoundTripsDoubles) {
  const Trajectory tr = run(fig1(OptimizerKind::GD, 3.0, 5), {true, true});
  std::istringstream is(trajectory_csv(tr, 10));
  std::string line;
  std::getline(is, line);
  for (const auto& r : tr.records) {
    std::getline(is, line);
    std::stringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    EXPECT_EQ(std::stol(cell), r.step);
    std::getline(ls, cell, ',');
    EXPECT_EQ(std::stod(cell), r.total_loss);
    std::getline(ls, cell, ',');
    std::getline(ls, cell, ',');
    std::getline(ls, cell, ',');
    EXPECT_EQ(std::stod(cell), *r.msgn_inf_dev);
  }
}

TEST(Export, JsonRoundTrip) {
  const std::string path = temp_path("rt.json");
  const Trajectory a = run(fig1(OptimizerKind::Muon, 0.75), {true, false});
  export_trajectory(a, 10, path, ExportFormat::Json);
  EXPECT_EQ(import_trajectory_json(path), a);
  std::filesystem::remove(path);
}

TEST(Export, SweepsAndFits) {
  SweepResult s;
  s.kind = OptimizerKind::Muon;
  s.l_star = 0.5;
  s.entries = {{10, 0.1, 0.6}, {20, 0.05, 0.525}};
  const std::string csv = temp_path("sweep.csv"), json = temp_path("sweep.json");
  FitResult f{3.0, 2.0, 0.0, 10, 20, 2};
  export_sweeps({s}, {f}, csv, ExportFormat::Csv);
  export_sweeps({s}, {f}, json, ExportFormat::Json);
  EXPECT_EQ(slurp(csv).substr(0, 41), "optimizer,budget,best_eta,min_loss,excess");
  const std::string fit = temp_path("sweep_fit.csv");
  EXPECT_NE(slurp(fit).find("muon,3,2,"), std::string::npos);
  EXPECT_NE(slurp(json).find("\"gamma\""), std::string::npos);
  for (const auto& p : {csv, json, fit}) std::filesystem::remove(p);
}

TEST(Format, Parse) {
  EXPECT_EQ(parse_format("csv"), ExportFormat::Csv);
  EXPECT_EQ(parse_format("json"), ExportFormat::Json);
  EXPECT_THROW(parse_format("xml"), InvalidArgument);
}
