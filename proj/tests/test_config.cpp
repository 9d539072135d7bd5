// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "amem/config.hpp"
#include "amem/errors.hpp"

using namespace amem;

TEST(Config, DefaultsAreFig1) {
  const ExperimentConfig c;
  const RunConfig rc = c.run_config();
  EXPECT_EQ(rc.spec.K(), 100);
  EXPECT_EQ(rc.opt.kind, OptimizerKind::Muon);
  EXPECT_EQ(rc.opt.eta, 0.75);
  EXPECT_EQ(rc.steps, 50);
  EXPECT_EQ(rc.spec.alpha, 0.1);
}

TEST(Config, ParsesAllKeys) {
  const ExperimentConfig c = parse_config(R"({
    "M": 4, "C": 8,
    "spectrum": {"type": "power_law", "beta": 2.0},
    "alpha": 0.2,
    "optimizer": {"kind": "muon", "eta": 0.3,
                  "sign_method": {"type": "newton_schulz", "iterations": 9, "coefficients": "muon"}},
    "steps": 17, "seed": 5, "probes": ["losses", "msgn_deviation"], "output": "x.json", "format": "json",
    "record_every": 2, "engine": "dense", "basis": "identity", "theory_overlay": true,
    "sweep": {"budgets": [4, 8, 16], "eta_grid": [0.1, 0.2], "final_window": 2, "optimizers": ["gd"]}
  })");
  EXPECT_EQ(c.M, 4);
  EXPECT_EQ(c.C, 8);
  EXPECT_EQ(std::get<PowerLawSpectrum>(c.spectrum).beta, 2.0);
  EXPECT_EQ(c.alpha, 0.2);
  const auto& ns = std::get<NewtonSchulz>(c.optimizer.sign_method);
  EXPECT_EQ(ns.iterations, 9);
  EXPECT_EQ(ns.coeffs, NewtonSchulz::kMuon);
  EXPECT_EQ(c.steps, 17);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_TRUE(c.probes.msgn_deviation);
  EXPECT_FALSE(c.probes.weight_structure);
  EXPECT_EQ(*c.output, "x.json");
  EXPECT_EQ(c.format, ExportFormat::Json);
  EXPECT_EQ(c.record_every, 2);
  EXPECT_EQ(c.engine, Engine::Dense);
  EXPECT_TRUE(c.identity_basis);
  EXPECT_TRUE(c.theory_overlay);
  EXPECT_EQ(c.sweep.budgets, (std::vector<long>{4, 8, 16}));
  EXPECT_EQ(c.sweep.final_window, 2);
  EXPECT_EQ(c.sweep.optimizers, std::vector<OptimizerKind>{OptimizerKind::GD});
}

TEST(Config, KeyK) {
  EXPECT_EQ(parse_config(R"({"K": 1000, "M": 10})").C, 100);
  EXPECT_EQ(parse_config(R"({"K": 1000, "C": 50})").M, 20);
  EXPECT_THROW(parse_config(R"({"K": 1001, "M": 10})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"K": 1000, "M": 10, "C": 50})"), InvalidArgument);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(parse_config(R"({"stepz": 3})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"optimizer": {"kind": "gd", "momentum": 0.9}})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"spectrum": {"type": "zipf"}})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"steps": 2.5})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"seed": -1})"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"probes": ["bogus"]})"), InvalidArgument);
  EXPECT_THROW(parse_config("{not json"), InvalidArgument);
}

TEST(Config, CanonicalJsonRoundTrip) {
  ExperimentConfig c;
  c.M = 3;
  c.C = 7;
  c.spectrum = PowerLawSpectrum{1.7};
  c.optimizer = {OptimizerKind::TraSignGD, 0.125, NewtonSchulz{7, {1.0, 2.0, 3.0}}};
  c.probes.weight_structure = true;
  c.output = "o.csv";
  c.sweep.budgets = {1, 2, 3};
  c.sweep.optimizers = {OptimizerKind::Muon};
  const std::string text = to_json(c);
  EXPECT_EQ(to_json(parse_config(text)), text);
}

TEST(Config, OverlaysOnBase) {
  ExperimentConfig base;
  base.steps = 123;
  const ExperimentConfig c = parse_config(R"({"alpha": 0.3})", base);
  EXPECT_EQ(c.steps, 123);
  EXPECT_EQ(c.alpha, 0.3);
}

TEST(Presets, ShippedPresetsLoad) {
  const auto names = preset_names();
  for (const char* required : {"fig1", "fig3", "scaling-beta15"})
    EXPECT_NE(std::find(names.begin(), names.end(), required), names.end()) << required;
  for (const auto& n : names) EXPECT_NO_THROW(load_preset(n).run_config()) << n;
  const ExperimentConfig fig3 = load_preset("fig3");
  EXPECT_EQ(fig3.M * fig3.C, 1000);
  EXPECT_EQ(fig3.C, 100);
  const ExperimentConfig sc = load_preset("scaling-beta15");
  EXPECT_EQ(sc.M, 64);
  EXPECT_EQ(default_budgets(sc), (std::vector<long>{128, 256, 384, 512}));
  EXPECT_THROW(load_preset("nope"), InvalidArgument);
}

// The fig1 preset spells out exactly the built-in defaults.
TEST(Presets, Fig1EqualsDefaults) { EXPECT_EQ(to_json(load_preset("fig1")), to_json(ExperimentConfig{})); }

TEST(Probes, ParseList) {
  const Probes p = parse_probes("losses, delta_gap,weight_structure");
  EXPECT_FALSE(p.msgn_deviation);
  EXPECT_TRUE(p.weight_structure);
  EXPECT_THROW(parse_probes("losses,nope"), InvalidArgument);
}
