// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "amem/block_dynamics.hpp"
#include "amem/errors.hpp"
#include "amem/optimizers.hpp"
#include "amem/runner.hpp"

using namespace amem;

namespace {

const std::vector<double> kLongTail{0.15, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05};

KnowledgeSpec fig1_spec(double alpha = 0.1) { return build_spec(10, 10, ExplicitSpectrum{kLongTail}, alpha); }

DenseMatrix entry_sign(const DenseMatrix& a) {
  return a.unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); });
}

}  // namespace

TEST(Optimizers, ParseAndName) {
  for (const char* n : {"gd", "muon", "signgd", "tra-signgd"}) EXPECT_EQ(to_string(parse_optimizer(n)), n);
  EXPECT_THROW(parse_optimizer("adam"), InvalidArgument);
}

TEST(Optimizers, FirstStepFromZero) {
  const KnowledgeSpec s = build_spec(3, 4, PowerLawSpectrum{1.5}, 0.1);
  const EmbeddingBasis b = random_basis(12, 5);
  const LossGradient g0 = loss_and_gradient(zero_state(12), b, s);
  const double eta = 0.3;

  MemoryState gd = zero_state(12), mu = zero_state(12), sg = zero_state(12), tra = zero_state(12);
  step(gd, {OptimizerKind::GD, eta}, b, s);
  step(mu, {OptimizerKind::Muon, eta}, b, s);
  step(sg, {OptimizerKind::SignGD, eta}, b, s);
  step(tra, {OptimizerKind::TraSignGD, eta}, b, s);
  EXPECT_LT(max_norm(gd.w + eta * g0.grad_raw), 1e-15);
  EXPECT_LT(max_norm(mu.w + eta * matrix_sign(g0.grad_raw)), 1e-12);
  EXPECT_LT(max_norm(sg.w + eta * entry_sign(g0.grad_raw)), 1e-15);
  EXPECT_LT(max_norm(rotate(tra.w, b) + eta * entry_sign(g0.grad_rotated)), 1e-12);
  EXPECT_EQ(gd.step, 1);
}

TEST(Optimizers, TraSignGdEqualsSignGdInIdentityBasis) {
  const KnowledgeSpec s = build_spec(2, 5, ExplicitSpectrum{{0.7, 0.3}}, 0.1);
  const EmbeddingBasis id = identity_basis(10);
  MemoryState a = zero_state(10), b = zero_state(10);
  for (int t = 0; t < 20; ++t) {
    step(a, {OptimizerKind::SignGD, 0.2}, id, s);
    step(b, {OptimizerKind::TraSignGD, 0.2}, id, s);
  }
  EXPECT_LT(max_norm(a.w - b.w), 1e-14);
}

TEST(Optimizers, NonFiniteWeightsThrow) {
  const KnowledgeSpec s = build_spec(2, 2, ExplicitSpectrum{{0.5, 0.5}}, 0.0);
  MemoryState st = zero_state(4);
  // Two sign steps of the same direction exceed the double range.
  EXPECT_THROW(
      for (int t = 0; t < 5; ++t) step(st, {OptimizerKind::SignGD, 1e308}, identity_basis(4), s), NumericalError);
}

TEST(Optimizers, NewtonSchulzMuonNearExact) {
  const KnowledgeSpec s = build_spec(3, 4, PowerLawSpectrum{1.5}, 0.1);
  const EmbeddingBasis b = random_basis(12, 2);
  MemoryState a = zero_state(12), c = zero_state(12);
  const OptimizerConfig exact{OptimizerKind::Muon, 0.2};
  const OptimizerConfig ns{OptimizerKind::Muon, 0.2, NewtonSchulz{25, NewtonSchulz::kConvergent}};
  for (int t = 0; t < 5; ++t) {
    step(a, exact, b, s);
    step(c, ns, b, s);
  }
  EXPECT_LT(max_norm(a.w - c.w), 1e-6);
}

std::string block_case_name(const ::testing::TestParamInfo<std::tuple<OptimizerKind, double, int, int>>& info) {
  std::string name = to_string(std::get<0>(info.param)) + "_M" + std::to_string(std::get<2>(info.param)) + "_C" +
                     std::to_string(std::get<3>(info.param));
  std::replace(name.begin(), name.end(), '-', '_');
  return name;
}

// The reduced dynamics are checked against the dense simulation step by step.
class BlockVsDense : public ::testing::TestWithParam<std::tuple<OptimizerKind, double, int, int>> {};

TEST_P(BlockVsDense, TrajectoriesAgree) {
  const auto [kind, eta, M, C] = GetParam();
  RunConfig rc;
  rc.spec = M == 10 ? build_spec(M, C, ExplicitSpectrum{kLongTail}, 0.1) : build_spec(M, C, PowerLawSpectrum{1.5}, 0.1);
  rc.opt = {kind, eta};
  rc.steps = 30;
  rc.seed = 3;
  rc.engine = Engine::Dense;
  const Trajectory dense = run(rc, {true, false});
  rc.engine = Engine::Block;
  const Trajectory block = run(rc, {true, false});
  ASSERT_EQ(dense.records.size(), block.records.size());
  for (size_t i = 0; i < dense.records.size(); ++i) {
    const auto &d = dense.records[i], &b = block.records[i];
    EXPECT_NEAR(d.total_loss, b.total_loss, 1e-9) << "step " << d.step;
    EXPECT_NEAR(d.delta_gap, b.delta_gap, 1e-9);
    EXPECT_NEAR(*d.msgn_inf_dev, *b.msgn_inf_dev, 1e-8);
    for (int g = 0; g < M; ++g) EXPECT_NEAR(d.group_losses[g], b.group_losses[g], 1e-9);
  }
  EXPECT_EQ(dense.onset_first, block.onset_first);
  EXPECT_EQ(dense.onset_last, block.onset_last);
}

INSTANTIATE_TEST_SUITE_P(Optimizers, BlockVsDense,
                         ::testing::Values(std::tuple{OptimizerKind::GD, 20.0, 10, 10},
                                           std::tuple{OptimizerKind::Muon, 0.75, 10, 10},
                                           std::tuple{OptimizerKind::TraSignGD, 0.75, 10, 10},
                                           std::tuple{OptimizerKind::GD, 5.0, 3, 4},
                                           std::tuple{OptimizerKind::Muon, 0.4, 3, 4},
                                           std::tuple{OptimizerKind::TraSignGD, 0.4, 3, 4}),
                         block_case_name);

TEST(BlockDynamics, ExpandMatchesDenseWeights) {
  const KnowledgeSpec s = build_spec(3, 4, PowerLawSpectrum{1.5}, 0.1);
  const EmbeddingBasis b = random_basis(12, 1);
  for (OptimizerKind kind : {OptimizerKind::GD, OptimizerKind::Muon, OptimizerKind::TraSignGD}) {
    const OptimizerConfig opt{kind, 0.5};
    MemoryState dense = zero_state(12);
    BlockState block = zero_block_state(3);
    for (int t = 0; t < 15; ++t) {
      step(dense, opt, b, s);
      block_step(block, opt, s);
      EXPECT_LT(max_norm(rotate(dense.w, b) - expand(block, s)), 1e-10) << to_string(kind) << " step " << t;
    }
  }
}

TEST(BlockDynamics, SignOfResidualMatchesDense) {
  const KnowledgeSpec s = build_spec(3, 5, PowerLawSpectrum{1.5}, 0.1);
  BlockState st = zero_block_state(3);
  for (int t = 0; t < 8; ++t) {
    const BlockEval ev = evaluate(st, s);
    const DenseMatrix r = -loss_and_gradient_rotated(expand(st, s), s).grad_rotated;
    const BlockSign bs = block_matrix_sign(ev, s);
    EXPECT_LT(max_norm(expand_sign(bs, s) - matrix_sign(r)), 1e-10);
    DenseMatrix dev = matrix_sign(r);
    dev.diagonal().array() -= 1.0;
    EXPECT_NEAR(block_msgn_deviation(bs, s), max_norm(dev), 1e-10);
    block_apply(st, {OptimizerKind::Muon, 0.6}, s, ev);
  }
}

TEST(BlockDynamics, StructureMeasures) {
  const KnowledgeSpec s = build_spec(2, 3, PowerLawSpectrum{1.5}, 0.1);
  BlockState st = zero_block_state(2);
  st.omega << 1.0, 2.0;
  st.mu << 0.5, -0.5;
  st.gamma(0, 1) = 0.25;
  st.gamma(1, 0) = -0.25;
  DenseMatrix w = expand(st, s);
  EXPECT_EQ(block_structure_deviation(w, 2, 3), 0.0);
  w(0, 1) += 0.1;
  EXPECT_NEAR(block_structure_deviation(w, 2, 3), 0.1, 1e-15);
  DenseMatrix c = DenseMatrix::Constant(3, 3, 2.0);
  c.diagonal().setConstant(5.0);
  EXPECT_EQ(column_symmetry_deviation(c), 0.0);
  c(0, 2) = 2.5;
  EXPECT_NEAR(column_symmetry_deviation(c), 0.5, 1e-15);
}

TEST(BlockDynamics, UnsupportedOptimizers) {
  EXPECT_FALSE(block_supported({OptimizerKind::SignGD, 1.0}));
  EXPECT_FALSE(block_supported({OptimizerKind::Muon, 1.0, NewtonSchulz{}}));
  RunConfig rc;
  rc.spec = fig1_spec();
  rc.opt = {OptimizerKind::SignGD, 0.75};
  rc.engine = Engine::Block;
  EXPECT_THROW(run(rc), InvalidArgument);
}

TEST(Runner, RecordCountsAndDeterminism) {
  RunConfig rc;
  rc.spec = fig1_spec();
  rc.opt = {OptimizerKind::Muon, 0.75};
  rc.steps = 50;
  const Trajectory a = run(rc), b = run(rc);
  EXPECT_EQ(a.records.size(), 51u);
  EXPECT_EQ(a, b);
  for (size_t i = 1; i < a.records.size(); ++i) EXPECT_GT(a.records[i].step, a.records[i - 1].step);
  for (const auto& r : a.records) {
    EXPECT_NEAR(r.excess_risk, r.total_loss - optimal_loss(0.1, 100), 1e-12);
    EXPECT_GE(r.excess_risk, -1e-9);
  }

  rc.record_every = 7;
  const Trajectory sparse = run(rc);
  EXPECT_EQ(sparse.records.size(), 9u);  // 0, 7, ..., 49, 50
  EXPECT_EQ(sparse.records.back().step, 50);

  rc.steps = 0;
  const Trajectory zero = run(rc);
  ASSERT_EQ(zero.records.size(), 1u);
  EXPECT_NEAR(zero.records[0].total_loss, std::log(100.0), 1e-12);
}

TEST(Runner, ValidationAndFingerprint) {
  RunConfig rc;
  rc.spec = fig1_spec();
  rc.opt = {OptimizerKind::GD, 1.0};
  const std::string f = fingerprint(rc);
  EXPECT_EQ(f.size(), 16u);
  EXPECT_EQ(f, fingerprint(rc));
  rc.opt.eta = 1.0 + 1e-12;
  EXPECT_NE(f, fingerprint(rc));
  rc.opt.eta = -1.0;
  EXPECT_THROW(run(rc), InvalidArgument);
  rc.opt.eta = 1.0;
  rc.steps = -1;
  EXPECT_THROW(run(rc), InvalidArgument);
  rc.steps = 1;
  rc.record_every = 0;
  EXPECT_THROW(run(rc), InvalidArgument);
}

TEST(Runner, AutoEngine) {
  RunConfig rc;
  rc.spec = build_spec(10, 100, ExplicitSpectrum{kLongTail}, 0.1);
  rc.opt = {OptimizerKind::Muon, 0.75};
  EXPECT_EQ(resolve_engine(rc), Engine::Block);
  rc.opt.kind = OptimizerKind::SignGD;
  EXPECT_EQ(resolve_engine(rc), Engine::Dense);
  rc.spec = fig1_spec();
  rc.opt.kind = OptimizerKind::GD;
  EXPECT_EQ(resolve_engine(rc), Engine::Dense);
}
