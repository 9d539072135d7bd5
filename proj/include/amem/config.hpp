// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amem/harness.hpp"
#include "amem/memory_model.hpp"
#include "amem/optimizers.hpp"
#include "amem/runner.hpp"

namespace amem {

struct SweepSettings {
  std::vector<long> budgets;            // empty: derived from the spectrum (see default_budgets)
  std::vector<double> eta_grid;         // empty: optimizer default grid
  int final_window = 1;
  std::vector<OptimizerKind> optimizers;  // used by `scaling`; empty means {muon, gd}
};

// Everything a CLI invocation can set. JSON keys mirror the field names, with
// `spectrum` and `optimizer` as nested objects.
struct ExperimentConfig {
  int M = 10;
  int C = 10;
  Spectrum spectrum = ExplicitSpectrum{{0.15, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05}};
  double alpha = 0.1;
  OptimizerConfig optimizer{OptimizerKind::Muon, 0.75, ExactSign{}};
  long steps = 50;
  std::uint64_t seed = 0;
  Probes probes;
  std::optional<std::string> output;
  ExportFormat format = ExportFormat::Csv;
  long record_every = 1;
  Engine engine = Engine::Auto;
  bool identity_basis = false;
  bool theory_overlay = false;
  SweepSettings sweep;

  RunConfig run_config() const;
};

// Parses a JSON document on top of `base`: keys that are present override,
// absent keys keep the base value. Unknown keys throw InvalidArgument.
ExperimentConfig parse_config(const std::string& json_text, const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base = {});

// Canonical JSON form; parse_config(to_json(c)) == c field for field.
std::string to_json(const ExperimentConfig& cfg);

// Directory holding the shipped presets; NAME resolves to <dir>/NAME.json.
// The AMEM_PRESET_DIR environment variable, when set, takes precedence.
std::string preset_directory();
std::vector<std::string> preset_names();
ExperimentConfig load_preset(const std::string& name, const ExperimentConfig& base = {});

// {0.25, 0.5, 0.75, 1} x B, where B = M^beta for a power-law spectrum and the
// configured step count otherwise. Rounded to the nearest integer, at least 1.
std::vector<long> default_budgets(const ExperimentConfig& cfg);

// "losses,delta_gap,msgn_deviation,weight_structure" in any subset; the first
// two are always computed and accepted for completeness.
Probes parse_probes(const std::string& list);
std::vector<std::string> probe_names(const Probes& p);

}  // namespace amem
