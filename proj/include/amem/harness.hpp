// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amem/memory_model.hpp"
#include "amem/runner.hpp"

namespace amem {

// max_j cond(j, j) - min_j cond(j, j).
double delta_gap(const ProbabilityTable& table);

// Earliest and latest oscillation onset over all groups; -1 if some group never reached it.
std::pair<long, long> onset_range(const Trajectory& traj);

// Closed-form total-loss curve sampled at each recorded step, where one exists:
// GD (any alpha) via the per-group margin recursion, noiseless Muon via K e^(-eta t),
// noisy Muon as the L* + eta^2 ceiling after the phase window. Missing entries are nullopt.
std::vector<std::optional<double>> theory_overlay(const RunConfig& cfg, const Trajectory& traj);

enum class ExportFormat { Csv, Json };
ExportFormat parse_format(const std::string& name);
std::string to_string(ExportFormat f);

struct ExperimentResult {
  Trajectory trajectory;
  std::vector<std::optional<double>> overlay;  // empty unless requested
};

// Runs, optionally attaches the theory overlay, and writes `output` when set.
ExperimentResult run_experiment(const RunConfig& cfg, const Probes& probes, bool with_overlay = false,
                                const std::optional<std::string>& output = std::nullopt,
                                ExportFormat format = ExportFormat::Csv);

// Learning-rate grids.
// Muon: muon_budget_lr(T) * 10^(k/9), k = -9..9.
std::vector<double> default_muon_grid(long T, const KnowledgeSpec& spec);
// GD: (eta p_1) in 0.05 * 10^(k/9) up to 0.8, divided by p_1.
std::vector<double> default_gd_grid(const KnowledgeSpec& spec);

struct SweepConfig {
  RunConfig base;              // steps is replaced by each budget
  std::vector<long> budgets;
  std::vector<double> eta_grid;  // empty: default grid for the optimizer
  // Loss of a cell is the mean over the last `final_window` steps; 1 is the
  // plain final loss, 2 averages one period of a two-step oscillation.
  int final_window = 1;
  int jobs = 1;
};

struct SweepCell {
  long budget;
  double eta;
  double final_loss;
};

struct SweepEntry {
  long budget;
  double best_eta;
  double min_loss;
};

struct SweepResult {
  OptimizerKind kind = OptimizerKind::GD;
  double l_star = 0.0;
  int final_window = 1;
  std::vector<SweepEntry> entries;
  std::vector<SweepCell> cells;
};

// Cells are independent; with jobs > 1 they run on a thread pool and the
// result is identical to the sequential one.
SweepResult sweep_lr(const SweepConfig& cfg);

struct FitResult {
  double a = 0.0;
  double gamma = 0.0;
  double residual = 0.0;  // RMS of log-space residuals
  double t_min = 0.0;
  double t_max = 0.0;
  int points = 0;
};

// OLS of log(loss - l_star) on log T. Points whose excess is within
// 10 machine epsilons of zero are dropped; any excess <= 0 is an error, as are
// fewer than 3 remaining points.
FitResult fit_power_law(const std::vector<std::pair<double, double>>& points, double l_star);

// Serialization. CSV floats use 17 significant digits.
void export_trajectory(const Trajectory& traj, int M, const std::string& path, ExportFormat format,
                       const std::vector<std::optional<double>>& overlay = {});
Trajectory import_trajectory_json(const std::string& path);
std::string trajectory_csv(const Trajectory& traj, int M);
std::string trajectory_json(const Trajectory& traj, const std::vector<std::optional<double>>& overlay = {});

void export_sweeps(const std::vector<SweepResult>& sweeps, const std::vector<FitResult>& fits,
                   const std::string& path, ExportFormat format);

void write_text(const std::string& path, const std::string& text);

}  // namespace amem
