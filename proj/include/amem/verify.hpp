// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amem/linalg.hpp"
#include "amem/memory_model.hpp"

namespace amem {

// Theory-versus-simulation checks behind `amem verify`.
struct VerifyOptions {
  int K = 1000;
  int M = 10;
  double alpha = 0.1;
  double eta = 0.75;
  std::uint64_t seed = 0;
  // all | margin | msgn | structure | phase | stability
  std::string suite = "all";
  // Dense cross-checks run at M x min(C, dense_group_cap) so they stay cheap at large K.
  int dense_group_cap = 20;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  bool skipped = false;
  std::string detail;
};

// Frequencies used by the suite: the long-tail profile {0.15, 0.1 x 8, 0.05}
// when M = 10, otherwise a power law with beta = 1.5.
KnowledgeSpec verify_spec(int M, int C, double alpha);

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt);

// n x m matrix U diag(s) V^T with s log-spaced in [1, cond] (both ends attained).
DenseMatrix conditioned_matrix(int n, int m, double cond, std::uint64_t seed);

struct SignBenchRow {
  std::string method;
  int n = 0;
  int trials = 0;
  double max_spectral_error = 0.0;  // versus the exact sign
  double mean_micros = 0.0;
};

// Exact sign versus Newton-Schulz (convergent and Muon coefficients) on
// square matrices with condition number `cond`.
std::vector<SignBenchRow> msgn_benchmark(const std::vector<int>& sizes, int trials, int iterations, double cond,
                                         std::uint64_t seed);

}  // namespace amem
