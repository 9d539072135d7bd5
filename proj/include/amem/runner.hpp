// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amem/memory_model.hpp"
#include "amem/optimizers.hpp"

namespace amem {

// Dense simulates the K x K weights in a random (or identity) basis.
// Block runs the exact reduced dynamics of block_dynamics.hpp.
// Auto picks Block for K >= kAutoBlockThreshold when the optimizer allows it.
enum class Engine { Auto, Dense, Block };
inline constexpr int kAutoBlockThreshold = 512;

std::string to_string(Engine e);
Engine parse_engine(const std::string& name);

struct RunConfig {
  KnowledgeSpec spec;
  std::uint64_t seed = 0;  // embedding basis seed
  OptimizerConfig opt;
  long steps = 1;
  long record_every = 1;
  Engine engine = Engine::Auto;
  bool identity_basis = false;
};

struct Probes {
  bool msgn_deviation = false;   // max_ij |msgn(P' - P^') - I|
  bool weight_structure = false; // column symmetry for GD, block structure otherwise
};

struct TrajectoryRecord {
  long step = 0;
  double total_loss = 0.0;
  double excess_risk = 0.0;
  std::vector<double> group_losses;
  double delta_gap = 0.0;
  std::optional<double> msgn_inf_dev;
  std::optional<double> structure_dev;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct Trajectory {
  std::string fingerprint;
  std::vector<TrajectoryRecord> records;
  // Oscillation onset of item j: first step t with p^(j|j) - p^(j'|j) >= 1 - alpha
  // for some in-group j' != j, checked at every step. Per group: onset_first is
  // the earliest item onset (-1 if none), onset_last the latest (-1 until every
  // item of the group has reached it).
  std::vector<long> onset_first;
  std::vector<long> onset_last;

  bool operator==(const Trajectory&) const = default;
};

void validate(const RunConfig& cfg);

// Resolves Engine::Auto.
Engine resolve_engine(const RunConfig& cfg);

// Stable hex digest of every field that influences the trajectory.
std::string fingerprint(const RunConfig& cfg);

// Records steps 0, record_every, 2 record_every, ... and always the final step.
// Throws InvalidArgument for bad configs and NumericalError with the failing step.
Trajectory run(const RunConfig& cfg, const Probes& probes = {});

}  // namespace amem
